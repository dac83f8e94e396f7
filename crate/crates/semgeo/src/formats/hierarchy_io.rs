//! Line-oriented, versioned serializations of the location forest and of
//! (multi-)partitionings. Rows are emitted in canonical order so identical
//! builds produce byte-identical files.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geo::GeoCoordinate;
use crate::hierarchy::{LocationForest, LocationId};
use crate::partitioning::{MultiPartitioning, Partitioning};

/// Forest file:
///
/// ```text
/// forest v1
/// node N1 3        # location, sample count
/// edge N1 W2       # child, parent
/// ```
pub fn write_forest(path: impl AsRef<Path>, forest: &LocationForest) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "forest v1")?;
    let mut nodes: Vec<LocationId> = forest.nodes().collect();
    nodes.sort();
    for node in &nodes {
        writeln!(out, "node {node} {}", forest.sample_count(*node))?;
    }
    for node in &nodes {
        if let Some(parent) = forest.parent_of(*node) {
            writeln!(out, "edge {node} {parent}")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_forest(path: impl AsRef<Path>) -> Result<LocationForest> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut lines = reader.lines();
    let magic = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Format("empty forest file".into()))?;
    if magic.trim() != "forest v1" {
        return Err(Error::Format(format!(
            "bad magic '{}', expected 'forest v1'",
            magic.trim()
        )));
    }

    let mut nodes: HashSet<LocationId> = HashSet::new();
    let mut sample_count: HashMap<LocationId, u64> = HashMap::new();
    let mut parent: HashMap<LocationId, LocationId> = HashMap::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let bad = |reason: &str| Error::Format(format!("forest line {}: {reason}", i + 2));
        match tokens.next() {
            Some("node") => {
                let id: LocationId = tokens
                    .next()
                    .ok_or_else(|| bad("missing node id"))?
                    .parse()?;
                let count: u64 = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad("missing sample count"))?;
                if !nodes.insert(id) {
                    return Err(bad(&format!("duplicate node {id}")));
                }
                if count > 0 {
                    sample_count.insert(id, count);
                }
            }
            Some("edge") => {
                let child: LocationId = tokens
                    .next()
                    .ok_or_else(|| bad("missing child"))?
                    .parse()?;
                let target: LocationId = tokens
                    .next()
                    .ok_or_else(|| bad("missing parent"))?
                    .parse()?;
                if !nodes.contains(&child) || !nodes.contains(&target) {
                    return Err(bad("edge endpoint not declared as node"));
                }
                if parent.insert(child, target).is_some() {
                    return Err(bad(&format!("node {child} has two parents")));
                }
            }
            Some(other) => return Err(bad(&format!("unknown directive '{other}'"))),
            None => unreachable!("trimmed line is non-empty"),
        }
    }
    let forest = LocationForest::from_parts(nodes, parent, sample_count);
    if !forest.is_acyclic() {
        return Err(Error::Format("forest file contains a cycle".into()));
    }
    Ok(forest)
}

/// Partitioning file. Header lines pin the level thresholds; each cell row
/// carries, tab-separated: location id, localname (`-` if unknown), level
/// index, parent cell id (`-` at the coarsest level), center latitude,
/// center longitude, sample count.
pub fn write_partitioning(
    path: impl AsRef<Path>,
    mp: &MultiPartitioning,
    localnames: Option<&HashMap<LocationId, String>>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "partitioning v1")?;
    writeln!(out, "levels {}", mp.n_levels())?;
    for (level, partitioning) in mp.levels().iter().enumerate() {
        writeln!(out, "tau {level} {}", partitioning.tau_min())?;
    }
    for (level, partitioning) in mp.levels().iter().enumerate() {
        for &cell in partitioning.cells() {
            let localname = localnames
                .and_then(|names| names.get(&cell))
                .map(|n| n.replace(['\t', '\n'], " "))
                .unwrap_or_else(|| "-".into());
            let parent = if level + 1 < mp.n_levels() {
                mp.parent_cell(level, cell)
                    .map(|p| p.to_string())
                    .unwrap_or_else(|| "-".into())
            } else {
                "-".into()
            };
            let center = partitioning.center(cell).expect("center per cell");
            writeln!(
                out,
                "cell\t{cell}\t{localname}\t{level}\t{parent}\t{}\t{}\t{}",
                center.lat_deg(),
                center.lon_deg(),
                partitioning.count(cell).expect("count per cell"),
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_partitioning(path: impl AsRef<Path>) -> Result<MultiPartitioning> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut lines = reader.lines();
    let magic = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Format("empty partitioning file".into()))?;
    if magic.trim() != "partitioning v1" {
        return Err(Error::Format(format!(
            "bad magic '{}', expected 'partitioning v1'",
            magic.trim()
        )));
    }
    let levels_line = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Format("missing levels line".into()))?;
    let n_levels: usize = levels_line
        .trim()
        .strip_prefix("levels ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad levels line '{levels_line}'")))?;
    if n_levels == 0 {
        return Err(Error::Format("partitioning needs at least one level".into()));
    }

    let mut taus: Vec<Option<u64>> = vec![None; n_levels];
    for _ in 0..n_levels {
        let line = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Format("missing tau line".into()))?;
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("tau") {
            return Err(Error::Format(format!("bad tau line '{line}'")));
        }
        let level: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad tau line '{line}'")))?;
        let value: u64 = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad tau line '{line}'")))?;
        if level >= n_levels || taus[level].is_some() {
            return Err(Error::Format(format!("unexpected tau for level {level}")));
        }
        taus[level] = Some(value);
    }
    let taus: Vec<u64> = taus
        .into_iter()
        .map(|t| t.ok_or_else(|| Error::Format("missing tau for a level".into())))
        .collect::<Result<_>>()?;

    struct Row {
        cell: LocationId,
        level: usize,
        parent: Option<LocationId>,
        center: GeoCoordinate,
        count: u64,
    }
    let mut rows: Vec<Row> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::Format(format!("cell row {}: {reason}", i + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 8 || fields[0] != "cell" {
            return Err(bad("expected 8 tab-separated fields starting with 'cell'"));
        }
        let cell: LocationId = fields[1].parse()?;
        let level: usize = fields[3].parse().map_err(|_| bad("bad level"))?;
        if level >= n_levels {
            return Err(bad("level out of range"));
        }
        let parent = match fields[4] {
            "-" => None,
            text => Some(text.parse::<LocationId>()?),
        };
        let lat: f64 = fields[5].parse().map_err(|_| bad("bad latitude"))?;
        let lon: f64 = fields[6].parse().map_err(|_| bad("bad longitude"))?;
        let count: u64 = fields[7].parse().map_err(|_| bad("bad count"))?;
        rows.push(Row {
            cell,
            level,
            parent,
            center: GeoCoordinate::new(lat, lon)?,
            count,
        });
    }

    let mut levels = Vec::with_capacity(n_levels);
    let mut parent_maps: Vec<HashMap<LocationId, LocationId>> = Vec::new();
    for (level, &tau) in taus.iter().enumerate() {
        let mut level_rows: Vec<&Row> = rows.iter().filter(|r| r.level == level).collect();
        level_rows.sort_by_key(|r| r.cell);
        if level_rows.is_empty() {
            return Err(Error::Format(format!("level {level} has no cells")));
        }
        let cells: Vec<LocationId> = level_rows.iter().map(|r| r.cell).collect();
        let centers: Vec<GeoCoordinate> = level_rows.iter().map(|r| r.center).collect();
        let counts: Vec<u64> = level_rows.iter().map(|r| r.count).collect();
        if level + 1 < n_levels {
            let map: HashMap<LocationId, LocationId> = level_rows
                .iter()
                .map(|r| {
                    r.parent
                        .map(|p| (r.cell, p))
                        .ok_or_else(|| Error::Format(format!("cell {} lacks a parent", r.cell)))
                })
                .collect::<Result<_>>()?;
            parent_maps.push(map);
        }
        levels.push(Partitioning::from_parts(tau, cells, centers, counts));
    }
    // parent targets must be cells of the next coarser level
    for (level, map) in parent_maps.iter().enumerate() {
        for (&cell, &parent) in map {
            if !levels[level + 1].contains(parent) {
                return Err(Error::Format(format!(
                    "cell {cell} maps to {parent}, which is not a level-{} cell",
                    level + 1
                )));
            }
        }
    }
    Ok(MultiPartitioning::from_parts(levels, parent_maps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_hierarchy, AddressVector};
    use crate::partitioning::{construct_multi, CenterMode};

    fn nid(i: u64) -> LocationId {
        LocationId::node(i)
    }

    fn fixture() -> (LocationForest, MultiPartitioning) {
        let mut chains = Vec::new();
        for i in 0..30u64 {
            let coordinate = GeoCoordinate::new((i % 7) as f64, (i % 5) as f64).unwrap();
            let address = AddressVector::new(vec![
                nid(100 + i % 6),
                nid(10 + i % 2),
                nid(1),
            ])
            .unwrap();
            chains.push((coordinate, address));
        }
        let addresses: Vec<AddressVector> = chains.iter().map(|(_, a)| a.clone()).collect();
        let build = build_hierarchy(&addresses).unwrap();
        let samples: Vec<_> = chains
            .iter()
            .zip(build.remapped.iter())
            .map(|((c, _), r)| (*c, r.clone().unwrap()))
            .collect();
        let mp = construct_multi(&build.forest, &samples, &[3, 9], CenterMode::Spherical).unwrap();
        (build.forest, mp)
    }

    #[test]
    fn forest_round_trips_exactly() {
        let (forest, _) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.txt");
        write_forest(&path, &forest).unwrap();
        let back = read_forest(&path).unwrap();
        assert_eq!(back.node_count(), forest.node_count());
        for node in forest.nodes() {
            assert_eq!(back.parent_of(node), forest.parent_of(node));
            assert_eq!(back.sample_count(node), forest.sample_count(node));
        }
        // writing the reread forest reproduces the file byte for byte
        let path2 = dir.path().join("forest2.txt");
        write_forest(&path2, &back).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn partitioning_round_trips_exactly() {
        let (_, mp) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("part.tsv");
        let names: HashMap<LocationId, String> =
            [(nid(1), "Rootland".to_string())].into_iter().collect();
        write_partitioning(&path, &mp, Some(&names)).unwrap();
        let back = read_partitioning(&path).unwrap();
        assert_eq!(back.n_levels(), mp.n_levels());
        for level in 0..mp.n_levels() {
            assert_eq!(back.level(level).cells(), mp.level(level).cells());
            assert_eq!(back.level(level).tau_min(), mp.level(level).tau_min());
            for &cell in mp.level(level).cells() {
                assert_eq!(back.level(level).count(cell), mp.level(level).count(cell));
                assert_eq!(back.level(level).center(cell), mp.level(level).center(cell));
                if level + 1 < mp.n_levels() {
                    assert_eq!(back.parent_cell(level, cell), mp.parent_cell(level, cell));
                }
            }
        }
        let path2 = dir.path().join("part2.tsv");
        write_partitioning(&path2, &back, Some(&names)).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "shrubbery v1\n").unwrap();
        assert!(read_forest(&path).is_err());
        assert!(read_partitioning(&path).is_err());
        std::fs::write(&path, "forest v1\nedge N1 N2\n").unwrap();
        assert!(read_forest(&path).is_err()); // endpoints not declared
        std::fs::write(
            &path,
            "forest v1\nnode N1 0\nnode N2 0\nedge N1 N2\nedge N2 N1\n",
        )
        .unwrap();
        assert!(read_forest(&path).is_err()); // cycle
    }
}
