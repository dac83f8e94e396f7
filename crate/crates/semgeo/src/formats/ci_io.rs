//! Tab-separated files for concept-influence records and their aggregates.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::concept::{CiAggregate, CiRecord, Interval};
use crate::error::{Error, Result};

pub const RECORDS_HEADER: &str = "sample_id\tconcept\trelative_size\ttki\tci\tgcd_error_km";
pub const AGGREGATE_HEADER: &str = "concept\tlo_km\thi_km\tcount\tmedian\tmean";

pub fn write_ci_records(path: impl AsRef<Path>, records: &[CiRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.sample_id, r.concept, r.relative_size, r.tki, r.ci, r.gcd_error_km
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ci_records(path: impl AsRef<Path>) -> Result<Vec<CiRecord>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Format("empty records file".into()))?;
    if header.trim() != RECORDS_HEADER {
        return Err(Error::Format(format!("unexpected header '{header}'")));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::Parse {
            path: path.as_ref().to_path_buf(),
            line: i + 2,
            reason: reason.into(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(bad("expected 6 tab-separated fields"));
        }
        records.push(CiRecord {
            sample_id: fields[0].to_string(),
            concept: fields[1].parse().map_err(|_| bad("bad concept"))?,
            relative_size: fields[2].parse().map_err(|_| bad("bad relative_size"))?,
            tki: fields[3].parse().map_err(|_| bad("bad tki"))?,
            ci: fields[4].parse().map_err(|_| bad("bad ci"))?,
            gcd_error_km: fields[5].parse().map_err(|_| bad("bad gcd_error_km"))?,
        });
    }
    Ok(records)
}

pub fn write_ci_aggregates(path: impl AsRef<Path>, aggregates: &[CiAggregate]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "{AGGREGATE_HEADER}")?;
    for a in aggregates {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            a.concept, a.interval.lo_km, a.interval.hi_km, a.count, a.median, a.mean
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ci_aggregates(path: impl AsRef<Path>) -> Result<Vec<CiAggregate>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Format("empty aggregate file".into()))?;
    if header.trim() != AGGREGATE_HEADER {
        return Err(Error::Format(format!("unexpected header '{header}'")));
    }
    let mut aggregates = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::Parse {
            path: path.as_ref().to_path_buf(),
            line: i + 2,
            reason: reason.into(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(bad("expected 6 tab-separated fields"));
        }
        let lo: f64 = fields[1].parse().map_err(|_| bad("bad lo_km"))?;
        let hi: f64 = fields[2].parse().map_err(|_| bad("bad hi_km"))?;
        aggregates.push(CiAggregate {
            concept: fields[0].parse().map_err(|_| bad("bad concept"))?,
            interval: Interval::new(lo, hi)?,
            count: fields[3].parse().map_err(|_| bad("bad count"))?,
            median: fields[4].parse().map_err(|_| bad("bad median"))?,
            mean: fields[5].parse().map_err(|_| bad("bad mean"))?,
        });
    }
    Ok(aggregates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_and_aggregates_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![CiRecord {
            sample_id: "img1".into(),
            concept: 7,
            relative_size: 0.0625,
            tki: 1.0,
            ci: 16.0,
            gcd_error_km: 3.5,
        }];
        let records_path = dir.path().join("records.tsv");
        write_ci_records(&records_path, &records).unwrap();
        assert_eq!(read_ci_records(&records_path).unwrap(), records);

        let aggregates = vec![CiAggregate {
            concept: 7,
            interval: Interval::new(0.0, 25.0).unwrap(),
            count: 1,
            median: 16.0,
            mean: 16.0,
        }];
        let agg_path = dir.path().join("agg.tsv");
        write_ci_aggregates(&agg_path, &aggregates).unwrap();
        assert_eq!(read_ci_aggregates(&agg_path).unwrap(), aggregates);
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tsv");
        std::fs::write(&path, "a\tb\n").unwrap();
        assert!(read_ci_records(&path).is_err());
        assert!(read_ci_aggregates(&path).is_err());
    }
}
