//! The sample table: a UTF-8 delimiter-separated file with header
//! `sample_id,lat,lon[,address]`, one row per image-coordinate pair. The
//! optional address column holds the fine-to-coarse location list in compact
//! form, e.g. `W438331516 W13470104 R112100`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geo::GeoCoordinate;
use crate::hierarchy::AddressVector;

/// One dataset sample: an identifier, its coordinate, and (when already
/// reverse geocoded) its address vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoSample {
    pub sample_id: String,
    pub coordinate: GeoCoordinate,
    pub address: Option<AddressVector>,
}

/// Counters and messages collected while streaming a dataset file.
#[derive(Debug, Clone, Default)]
pub struct DatasetReadStats {
    pub rows_ok: usize,
    pub rows_skipped: usize,
    pub diagnostics: Vec<String>,
}

const MAX_DIAGNOSTICS: usize = 64;

/// Streaming dataset reader. Malformed rows are skipped and counted; once
/// more than `error_budget` rows failed, iteration stops with an error.
pub struct DatasetReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    path: PathBuf,
    budget: usize,
    columns: Columns,
    seen_ids: HashSet<String>,
    stats: DatasetReadStats,
    fatal: bool,
}

#[derive(Debug, Clone, Copy)]
struct Columns {
    sample_id: usize,
    lat: usize,
    lon: usize,
    address: Option<usize>,
}

impl DatasetReader<File> {
    pub fn open(path: impl AsRef<Path>, error_budget: usize) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        Self::from_reader(file, path.as_ref().to_path_buf(), error_budget)
    }
}

impl<R: Read> DatasetReader<R> {
    pub fn from_reader(reader: R, path: PathBuf, error_budget: usize) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .flexible(true)
            .from_reader(reader);
        let headers = csv_reader
            .headers()
            .map_err(|e| Error::Parse {
                path: path.clone(),
                line: 1,
                reason: e.to_string(),
            })?
            .clone();
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let columns = Columns {
            sample_id: find("sample_id").ok_or_else(|| missing_column(&path, "sample_id"))?,
            lat: find("lat").ok_or_else(|| missing_column(&path, "lat"))?,
            lon: find("lon").ok_or_else(|| missing_column(&path, "lon"))?,
            address: find("address"),
        };
        Ok(Self {
            records: csv_reader.into_records(),
            path,
            budget: error_budget,
            columns,
            seen_ids: HashSet::new(),
            stats: DatasetReadStats::default(),
            fatal: false,
        })
    }

    pub fn stats(&self) -> &DatasetReadStats {
        &self.stats
    }

    pub fn into_stats(self) -> DatasetReadStats {
        self.stats
    }

    fn parse_record(&mut self, record: &csv::StringRecord) -> Result<GeoSample> {
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |index: usize| -> Result<&str> {
            record.get(index).ok_or_else(|| Error::Parse {
                path: self.path.clone(),
                line,
                reason: format!("missing column {index}"),
            })
        };
        let bad = |reason: String| Error::Parse {
            path: self.path.clone(),
            line,
            reason,
        };

        let sample_id = field(self.columns.sample_id)?.trim().to_string();
        if sample_id.is_empty() {
            return Err(bad("empty sample_id".into()));
        }
        if !self.seen_ids.insert(sample_id.clone()) {
            return Err(bad(format!("duplicate sample_id '{sample_id}'")));
        }
        let lat: f64 = field(self.columns.lat)?
            .trim()
            .parse()
            .map_err(|e| bad(format!("bad lat: {e}")))?;
        let lon: f64 = field(self.columns.lon)?
            .trim()
            .parse()
            .map_err(|e| bad(format!("bad lon: {e}")))?;
        let coordinate = GeoCoordinate::new(lat, lon).map_err(|e| bad(e.to_string()))?;

        let address = match self.columns.address {
            Some(index) => {
                let raw = record.get(index).unwrap_or("").trim();
                if raw.is_empty() {
                    None
                } else {
                    Some(raw.parse::<AddressVector>().map_err(|e| bad(e.to_string()))?)
                }
            }
            None => None,
        };
        Ok(GeoSample {
            sample_id,
            coordinate,
            address,
        })
    }

    fn note_skip(&mut self, reason: String) {
        self.stats.rows_skipped += 1;
        if self.stats.diagnostics.len() < MAX_DIAGNOSTICS {
            self.stats.diagnostics.push(reason);
        }
    }
}

impl<R: Read> Iterator for DatasetReader<R> {
    type Item = Result<GeoSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.fatal {
            return None;
        }
        loop {
            let record = match self.records.next()? {
                Ok(record) => record,
                Err(e) => {
                    self.note_skip(format!("unreadable row: {e}"));
                    if self.stats.rows_skipped > self.budget {
                        self.fatal = true;
                        return Some(Err(Error::ErrorBudgetExceeded {
                            path: self.path.clone(),
                            budget: self.budget,
                        }));
                    }
                    continue;
                }
            };
            match self.parse_record(&record) {
                Ok(sample) => {
                    self.stats.rows_ok += 1;
                    return Some(Ok(sample));
                }
                Err(e) => {
                    self.note_skip(e.to_string());
                    if self.stats.rows_skipped > self.budget {
                        self.fatal = true;
                        return Some(Err(Error::ErrorBudgetExceeded {
                            path: self.path.clone(),
                            budget: self.budget,
                        }));
                    }
                }
            }
        }
    }
}

/// Reads a whole dataset file into memory.
pub fn read_dataset(
    path: impl AsRef<Path>,
    error_budget: usize,
) -> Result<(Vec<GeoSample>, DatasetReadStats)> {
    let mut reader = DatasetReader::open(path, error_budget)?;
    let mut samples = Vec::new();
    for item in &mut reader {
        samples.push(item?);
    }
    Ok((samples, reader.into_stats()))
}

pub fn write_dataset(path: impl AsRef<Path>, samples: &[GeoSample]) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "sample_id,lat,lon,address")?;
    for sample in samples {
        let address = sample
            .address
            .as_ref()
            .map(|a| a.to_string())
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{}",
            sample.sample_id,
            sample.coordinate.lat_deg(),
            sample.coordinate.lon_deg(),
            address
        )?;
    }
    out.flush()?;
    Ok(())
}

fn missing_column(path: &Path, name: &str) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        reason: format!("header lacks required column '{name}'"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn reader_for(text: &str, budget: usize) -> DatasetReader<Cursor<Vec<u8>>> {
        DatasetReader::from_reader(
            Cursor::new(text.as_bytes().to_vec()),
            PathBuf::from("<memory>"),
            budget,
        )
        .unwrap()
    }

    #[test]
    fn well_formed_rows_parse_in_order() {
        let text = "sample_id,lat,lon,address\n\
                    a,1.5,2.5,N1 W2 R3\n\
                    b,-10,20,\n\
                    c,0,0,N9\n";
        let mut reader = reader_for(text, 0);
        let samples: Vec<GeoSample> = reader.by_ref().map(|r| r.unwrap()).collect();
        assert_eq!(samples.len(), 3);
        assert_eq!(samples[0].sample_id, "a");
        assert_eq!(samples[0].address.as_ref().unwrap().len(), 3);
        assert!(samples[1].address.is_none());
        assert_eq!(reader.stats().rows_ok, 3);
        assert_eq!(reader.stats().rows_skipped, 0);
    }

    #[test]
    fn out_of_range_latitude_is_skipped_with_diagnostic() {
        let text = "sample_id,lat,lon\n\
                    good,10,10\n\
                    bad,91,0\n\
                    also_good,-5,5\n";
        let mut reader = reader_for(text, 10);
        let samples: Vec<GeoSample> = reader.by_ref().map(|r| r.unwrap()).collect();
        assert_eq!(samples.len(), 2);
        assert_eq!(reader.stats().rows_skipped, 1);
        assert!(reader.stats().diagnostics[0].contains("latitude"));
    }

    #[test]
    fn exceeding_the_error_budget_stops_the_stream() {
        let text = "sample_id,lat,lon\n\
                    a,91,0\n\
                    b,92,0\n\
                    c,10,0\n";
        let mut reader = reader_for(text, 1);
        let first = reader.next().unwrap();
        assert!(matches!(first, Err(Error::ErrorBudgetExceeded { .. })));
        assert!(reader.next().is_none());
    }

    #[test]
    fn duplicate_sample_ids_are_rejected() {
        let text = "sample_id,lat,lon\n\
                    a,1,1\n\
                    a,2,2\n";
        let mut reader = reader_for(text, 10);
        let samples: Vec<GeoSample> = reader.by_ref().map(|r| r.unwrap()).collect();
        assert_eq!(samples.len(), 1);
        assert!(reader.stats().diagnostics[0].contains("duplicate"));
    }

    #[test]
    fn missing_header_column_fails_at_open() {
        let text = "sample_id,latitude,lon\na,1,1\n";
        let result = DatasetReader::from_reader(
            Cursor::new(text.as_bytes().to_vec()),
            PathBuf::from("<memory>"),
            0,
        );
        assert!(result.is_err());
    }

    /// Wraps a reader so the CSV layer sees one byte per read call.
    struct OneByte<R: Read>(R);

    impl<R: Read> Read for OneByte<R> {
        fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
            if buf.is_empty() {
                return Ok(0);
            }
            self.0.read(&mut buf[..1])
        }
    }

    #[test]
    fn parsing_is_independent_of_read_chunking() {
        let text = "sample_id,lat,lon,address\n\
                    a,1.25,2.5,N1 W2\n\
                    b,-10.125,20.0625,\n";
        let normal: Vec<GeoSample> = reader_for(text, 0).map(|r| r.unwrap()).collect();
        let tiny = DatasetReader::from_reader(
            OneByte(Cursor::new(text.as_bytes().to_vec())),
            PathBuf::from("<memory>"),
            0,
        )
        .unwrap();
        let chunked: Vec<GeoSample> = tiny.map(|r| r.unwrap()).collect();
        assert_eq!(normal, chunked);
    }

    #[test]
    fn large_synthetic_file_matches_its_generator() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(83);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.csv");

        // the generator records ground truth: row count and a running
        // checksum over ids and coordinates
        let n = 100_000usize;
        let mut expected_checksum = 0.0f64;
        {
            use std::io::Write;
            let mut out = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
            writeln!(out, "sample_id,lat,lon,address").unwrap();
            for i in 0..n {
                let lat: f64 = rng.gen_range(-90.0..=90.0);
                let lon: f64 = rng.gen_range(-180.0..180.0);
                let loc = rng.gen_range(0..5000u64);
                expected_checksum += lat + lon + i as f64 + loc as f64;
                writeln!(out, "s{i},{lat},{lon},N{loc} R1").unwrap();
            }
        }

        let mut reader = DatasetReader::open(&path, 0).unwrap();
        let mut count = 0usize;
        let mut checksum = 0.0f64;
        for sample in reader.by_ref() {
            let sample = sample.unwrap();
            let index: f64 = sample.sample_id[1..].parse().unwrap();
            let loc = sample.address.as_ref().unwrap().finest().id as f64;
            checksum += sample.coordinate.lat_deg() + sample.coordinate.lon_deg() + index + loc;
            count += 1;
        }
        assert_eq!(count, n);
        assert_eq!(checksum, expected_checksum);
        assert_eq!(reader.stats().rows_skipped, 0);
    }

    #[test]
    fn write_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let samples = vec![
            GeoSample {
                sample_id: "x1".into(),
                coordinate: GeoCoordinate::new(48.8566, 2.3522).unwrap(),
                address: Some("N1 W2 R3".parse().unwrap()),
            },
            GeoSample {
                sample_id: "x2".into(),
                coordinate: GeoCoordinate::new(-33.1, 151.2).unwrap(),
                address: None,
            },
        ];
        write_dataset(&path, &samples).unwrap();
        let (back, stats) = read_dataset(&path, 0).unwrap();
        assert_eq!(back, samples);
        assert_eq!(stats.rows_skipped, 0);
    }
}
