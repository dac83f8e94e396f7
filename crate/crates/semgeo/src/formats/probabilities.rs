//! Per-sample class probability files.
//!
//! Line-oriented text with a header that pins the cell ordering of every
//! level, followed by one row per sample:
//!
//! ```text
//! probabilities v1
//! levels 2
//! cells 0 N1 N2 N3
//! cells 1 R7 R9
//! sample-42 0.1 0.2 0.7 | 0.4 0.6
//! ```
//!
//! The header must match the partitioning the file is read against; a
//! divergence is reported at the first differing cell.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::inference::{LevelProbabilities, SUM_TOLERANCE};
use crate::partitioning::MultiPartitioning;

pub struct ProbabilityReader<R: Read> {
    lines: std::io::Lines<BufReader<R>>,
    path: PathBuf,
    level_sizes: Vec<usize>,
    renormalize: bool,
    line_no: usize,
    fatal: bool,
}

impl ProbabilityReader<File> {
    pub fn open(path: impl AsRef<Path>, mp: &MultiPartitioning, renormalize: bool) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        Self::from_reader(file, path.as_ref().to_path_buf(), mp, renormalize)
    }
}

impl<R: Read> ProbabilityReader<R> {
    pub fn from_reader(
        reader: R,
        path: PathBuf,
        mp: &MultiPartitioning,
        renormalize: bool,
    ) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let mut line_no = 0;
        let mut read_line = |what: &str| -> Result<String> {
            line_no += 1;
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Format(format!("missing {what} line")))
        };

        let magic = read_line("version")?;
        if magic.trim() != "probabilities v1" {
            return Err(Error::Format(format!(
                "bad magic '{}', expected 'probabilities v1'",
                magic.trim()
            )));
        }
        let levels_line = read_line("levels")?;
        let levels: usize = levels_line
            .trim()
            .strip_prefix("levels ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad levels line '{levels_line}'")))?;
        if levels != mp.n_levels() {
            return Err(Error::ShapeMismatch {
                level: 0,
                expected: mp.n_levels(),
                got: levels,
            });
        }
        for level in 0..levels {
            let cells_line = read_line("cells")?;
            let mut tokens = cells_line.split_whitespace();
            if tokens.next() != Some("cells") {
                return Err(Error::Format(format!("bad cells line '{cells_line}'")));
            }
            let index: usize = tokens
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad cells line '{cells_line}'")))?;
            if index != level {
                return Err(Error::Format(format!(
                    "cells line for level {index}, expected level {level}"
                )));
            }
            let expected = mp.level(level).cells();
            let mut position = 0;
            for token in tokens {
                let declared = token.parse()?;
                match expected.get(position) {
                    Some(&cell) if cell == declared => {}
                    Some(&cell) => {
                        return Err(Error::Format(format!(
                            "cell ordering mismatch at level {level}, position {position}: \
                             file has {declared}, partitioning has {cell}"
                        )))
                    }
                    None => {
                        return Err(Error::Format(format!(
                            "cell ordering mismatch at level {level}: \
                             file has extra cell {declared}"
                        )))
                    }
                }
                position += 1;
            }
            if position != expected.len() {
                return Err(Error::Format(format!(
                    "cell ordering mismatch at level {level}: \
                     file is missing cell {}",
                    expected[position]
                )));
            }
        }

        Ok(Self {
            lines,
            path,
            level_sizes: mp.levels().iter().map(|p| p.len()).collect(),
            renormalize,
            line_no,
            fatal: false,
        })
    }

    fn parse_row(&self, line: &str) -> Result<(String, LevelProbabilities)> {
        let bad = |reason: String| Error::Parse {
            path: self.path.clone(),
            line: self.line_no,
            reason,
        };
        let mut tokens = line.split_whitespace();
        let sample_id = tokens
            .next()
            .ok_or_else(|| bad("empty row".into()))?
            .to_string();

        let mut per_level: Vec<Vec<f64>> = vec![Vec::new()];
        for token in tokens {
            if token == "|" {
                per_level.push(Vec::new());
                continue;
            }
            let value: f64 = token
                .parse()
                .map_err(|e| bad(format!("bad probability '{token}': {e}")))?;
            per_level.last_mut().unwrap().push(value);
        }
        if per_level.len() != self.level_sizes.len() {
            return Err(bad(format!(
                "row has {} levels, expected {}",
                per_level.len(),
                self.level_sizes.len()
            )));
        }
        for (level, vector) in per_level.iter_mut().enumerate() {
            if vector.len() != self.level_sizes[level] {
                return Err(bad(format!(
                    "level {level} has {} values, expected {}",
                    vector.len(),
                    self.level_sizes[level]
                )));
            }
            if vector.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(bad(format!(
                    "level {level} holds a negative or non-finite probability"
                )));
            }
            let sum: f64 = vector.iter().sum();
            if self.renormalize {
                if sum <= 0.0 {
                    return Err(bad(format!("level {level} sums to {sum}, cannot renormalize")));
                }
                for value in vector.iter_mut() {
                    *value /= sum;
                }
            } else if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(bad(format!(
                    "level {level} sums to {sum} (tolerance 1e-6); \
                     pass the renormalize flag to accept"
                )));
            }
        }
        Ok((sample_id, LevelProbabilities::new_unnormalized(per_level)))
    }
}

impl<R: Read> Iterator for ProbabilityReader<R> {
    type Item = Result<(String, LevelProbabilities)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.fatal {
            return None;
        }
        loop {
            self.line_no += 1;
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => {
                    self.fatal = true;
                    return Some(Err(e.into()));
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            match self.parse_row(&line) {
                Ok(row) => return Some(Ok(row)),
                Err(e) => {
                    self.fatal = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Streams `(sample_id, probabilities)` rows from a probability file after
/// validating its header against the partitioning.
pub fn read_probabilities(
    path: impl AsRef<Path>,
    mp: &MultiPartitioning,
    renormalize: bool,
) -> Result<ProbabilityReader<File>> {
    ProbabilityReader::open(path, mp, renormalize)
}

pub fn write_probabilities(
    path: impl AsRef<Path>,
    mp: &MultiPartitioning,
    rows: &[(String, LevelProbabilities)],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "probabilities v1")?;
    writeln!(out, "levels {}", mp.n_levels())?;
    for (level, partitioning) in mp.levels().iter().enumerate() {
        write!(out, "cells {level}")?;
        for cell in partitioning.cells() {
            write!(out, " {cell}")?;
        }
        writeln!(out)?;
    }
    for (sample_id, probs) in rows {
        write!(out, "{sample_id}")?;
        for (level, vector) in probs.levels().iter().enumerate() {
            if level > 0 {
                write!(out, " |")?;
            }
            for value in vector {
                write!(out, " {value}")?;
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
