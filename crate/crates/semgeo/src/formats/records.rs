//! Location metadata store: one self-describing JSON record per line, using
//! the field names of the source data (`type`, `isarea`, ...). The geometry
//! blob is carried through opaquely.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::LocationId;

/// Metadata of one extracted location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationRecord {
    pub id: LocationId,
    pub localname: String,
    #[serde(default)]
    pub category: String,
    #[serde(rename = "type", default)]
    pub loc_type: String,
    pub admin_level: u8,
    #[serde(rename = "isarea")]
    pub is_area: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wikidata: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wikipedia: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub place: Option<String>,
    /// Opaque pass-through geometry (point, line, or polygon JSON).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<serde_json::Value>,
}

/// Reads a JSONL metadata store into a map keyed by location id.
pub fn read_records(path: impl AsRef<Path>) -> Result<HashMap<LocationId, LocationRecord>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut records = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LocationRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.as_ref().to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        if record.admin_level > 15 {
            return Err(Error::Parse {
                path: path.as_ref().to_path_buf(),
                line: i + 1,
                reason: format!("admin_level {} outside 0-15", record.admin_level),
            });
        }
        if records.insert(record.id, record).is_some() {
            return Err(Error::Parse {
                path: path.as_ref().to_path_buf(),
                line: i + 1,
                reason: "duplicate location id".into(),
            });
        }
    }
    Ok(records)
}

/// Writes records as JSONL, sorted by id for reproducible output.
pub fn write_records(path: impl AsRef<Path>, records: &[LocationRecord]) -> Result<()> {
    let mut sorted: Vec<&LocationRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.id);
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    for record in sorted {
        serde_json::to_writer(&mut out, record).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
