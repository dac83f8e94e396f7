use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::concept::{
    aggregate, beta_delta, ci_score, BetaDelta, CiAggregate, CiParams, CiRecord, Interval,
};
use crate::error::{Error, Result};
use crate::formats::{
    read_ci_aggregates, read_ci_records, read_dataset, read_explanation, read_forest,
    read_partitioning, read_pgm, read_probabilities, read_records, write_ci_aggregates,
    write_ci_records, write_forest, write_partitioning, GeoSample,
};
use crate::geo::{accuracy_at, great_circle_distance, AccuracyTable, GeoCoordinate};
use crate::geocode::GeocodeClient;
use crate::hierarchy::{
    build_hierarchy, filter_rare_locations, AddressVector, LocationForest, LocationId,
};
use crate::inference::{
    flat_predict, hierarchical_predict, LevelProbabilities, Prediction, PredictionRecord,
};
use crate::partitioning::{assign, assign_multi, CellAssignment};

use super::{load_labels, require, tables, PipelineConfig};

fn concept_name(labels: &HashMap<u16, String>, concept: u16) -> String {
    labels
        .get(&concept)
        .cloned()
        .unwrap_or_else(|| concept.to_string())
}

// ---------------------------------------------------------------------------
// build-hierarchy

#[derive(Debug)]
pub struct BuildHierarchyReport {
    pub out: PathBuf,
    pub rows_ok: usize,
    pub rows_skipped: usize,
    pub without_address: usize,
    pub geocoded: usize,
    pub geocode_cache_hits: usize,
    pub initial_locations: usize,
    pub locations_removed: usize,
    pub vectors_emptied: usize,
    pub graph_nodes: usize,
    pub graph_edges: usize,
    pub forest_nodes: usize,
    pub forest_roots: usize,
    pub cycles_broken: usize,
    pub dropped_samples: usize,
}

impl BuildHierarchyReport {
    pub fn render(&self) -> String {
        let mut rows = vec![vec!["hierarchy build".to_string(), String::new()]];
        let mut push = |k: &str, v: String| rows.push(vec![k.to_string(), v]);
        push("dataset rows", self.rows_ok.to_string());
        push("rows skipped", self.rows_skipped.to_string());
        push("rows without address", self.without_address.to_string());
        if self.geocoded > 0 {
            push("reverse geocoded", self.geocoded.to_string());
            push("geocode cache hits", self.geocode_cache_hits.to_string());
        }
        push("unique locations before filter", self.initial_locations.to_string());
        push("locations below initial filter", self.locations_removed.to_string());
        push("vectors emptied by filter", self.vectors_emptied.to_string());
        push("graph nodes", self.graph_nodes.to_string());
        push("graph edges", self.graph_edges.to_string());
        push("forest nodes", self.forest_nodes.to_string());
        push("forest roots", self.forest_roots.to_string());
        push("cycles broken", self.cycles_broken.to_string());
        push("samples dropped at remap", self.dropped_samples.to_string());
        push("forest file", self.out.display().to_string());
        tables::render(&rows)
    }
}

pub fn cmd_build_hierarchy(config: &PipelineConfig) -> Result<BuildHierarchyReport> {
    let dataset_path = require(&config.dataset, "--dataset")?;
    let out = require(&config.out, "--out")?;
    let (samples, stats) = read_dataset(dataset_path, config.error_budget)?;

    let mut without_address = 0usize;
    let mut geocoded = 0usize;
    let mut geocode_cache_hits = 0usize;
    let mut addresses: Vec<AddressVector> = Vec::with_capacity(samples.len());
    let client = if config.geocode {
        Some(GeocodeClient::new(config.geocode_config())?)
    } else {
        None
    };
    for sample in &samples {
        match (&sample.address, &client) {
            (Some(address), _) => addresses.push(address.clone()),
            (None, Some(client)) => {
                let result = client.reverse(sample.coordinate)?;
                geocoded += 1;
                if result.from_cache {
                    geocode_cache_hits += 1;
                }
                addresses.push(result.address);
            }
            (None, None) => without_address += 1,
        }
    }
    if addresses.is_empty() {
        return Err(Error::EmptyInput(
            "dataset has no address vectors (enable geocoding or supply an address column)",
        ));
    }

    let (filtered, filter_stats) = if config.tau_initial > 1 {
        filter_rare_locations(&addresses, config.tau_initial)
    } else {
        (
            addresses.iter().cloned().map(Some).collect(),
            crate::hierarchy::FilterStats {
                locations_before: count_unique(&addresses),
                ..Default::default()
            },
        )
    };
    let surviving: Vec<AddressVector> = filtered.into_iter().flatten().collect();
    if surviving.is_empty() {
        return Err(Error::EmptyInput(
            "the initial location filter removed every address vector",
        ));
    }
    let build = build_hierarchy(&surviving)?;
    write_forest(out, &build.forest)?;

    Ok(BuildHierarchyReport {
        out: out.clone(),
        rows_ok: stats.rows_ok,
        rows_skipped: stats.rows_skipped,
        without_address,
        geocoded,
        geocode_cache_hits,
        initial_locations: filter_stats.locations_before,
        locations_removed: filter_stats.locations_removed,
        vectors_emptied: filter_stats.vectors_emptied,
        graph_nodes: build.graph_nodes,
        graph_edges: build.graph_edges,
        forest_nodes: build.forest.node_count(),
        forest_roots: build.forest.roots().count(),
        cycles_broken: build.prune.cycles_broken(),
        dropped_samples: build.dropped_samples,
    })
}

fn count_unique(addresses: &[AddressVector]) -> usize {
    let mut set = std::collections::HashSet::new();
    for address in addresses {
        set.extend(address.locations().iter().copied());
    }
    set.len()
}

// ---------------------------------------------------------------------------
// build-partitioning

#[derive(Debug)]
pub struct BuildPartitioningReport {
    pub out: PathBuf,
    pub levels: Vec<(u64, usize)>,
    pub total_cells: usize,
    pub samples_used: usize,
    pub dropped_not_in_forest: usize,
    pub dropped_by_area_filter: usize,
    pub without_address: usize,
}

impl BuildPartitioningReport {
    pub fn render(&self) -> String {
        let mut rows = vec![vec![
            "level".to_string(),
            "tau_min".to_string(),
            "cells".to_string(),
        ]];
        for (level, (tau, cells)) in self.levels.iter().enumerate() {
            rows.push(vec![level.to_string(), tau.to_string(), cells.to_string()]);
        }
        let mut text = tables::render(&rows);
        text.push_str(&format!(
            "total cells {} over {} samples ({} dropped at remap, {} by area filter, {} without address)\npartitioning file {}\n",
            self.total_cells,
            self.samples_used,
            self.dropped_not_in_forest,
            self.dropped_by_area_filter,
            self.without_address,
            self.out.display()
        ));
        text
    }
}

struct RemappedDataset {
    samples: Vec<(String, GeoCoordinate, AddressVector)>,
    dropped_not_in_forest: usize,
    without_address: usize,
}

fn remap_dataset(forest: &LocationForest, samples: &[GeoSample]) -> RemappedDataset {
    let mut out = Vec::with_capacity(samples.len());
    let mut dropped = 0usize;
    let mut without_address = 0usize;
    for sample in samples {
        match &sample.address {
            Some(address) => match forest.remap(address) {
                Ok(remapped) => {
                    out.push((sample.sample_id.clone(), sample.coordinate, remapped))
                }
                Err(_) => dropped += 1,
            },
            None => without_address += 1,
        }
    }
    RemappedDataset {
        samples: out,
        dropped_not_in_forest: dropped,
        without_address,
    }
}

pub fn cmd_build_partitioning(config: &PipelineConfig) -> Result<BuildPartitioningReport> {
    let dataset_path = require(&config.dataset, "--dataset")?;
    let forest_path = require(&config.forest, "--forest")?;
    let out = require(&config.out, "--out")?;

    let forest = read_forest(forest_path)?;
    let (raw_samples, _) = read_dataset(dataset_path, config.error_budget)?;
    let remapped = remap_dataset(&forest, &raw_samples);

    let metadata = match &config.metadata {
        Some(path) => Some(read_records(path)?),
        None => None,
    };

    let mut dropped_by_area_filter = 0usize;
    let training: Vec<(GeoCoordinate, AddressVector)> = if config.area_filter {
        let records = metadata.as_ref().ok_or_else(|| {
            Error::Config("--area-filter needs --metadata with isarea information".into())
        })?;
        remapped
            .samples
            .iter()
            .filter_map(|(_, coordinate, address)| {
                let kept =
                    address.filtered(|loc| records.get(&loc).map(|r| r.is_area) == Some(true));
                match kept {
                    Some(address) => Some((*coordinate, address)),
                    None => {
                        dropped_by_area_filter += 1;
                        None
                    }
                }
            })
            .collect()
    } else {
        remapped
            .samples
            .iter()
            .map(|(_, coordinate, address)| (*coordinate, address.clone()))
            .collect()
    };
    if training.is_empty() {
        return Err(Error::EmptyInput("no usable samples for partitioning"));
    }

    let mp = crate::partitioning::construct_multi(
        &forest,
        &training,
        &config.taus,
        config.center_mode,
    )?;

    let localnames: Option<HashMap<LocationId, String>> = metadata.as_ref().map(|records| {
        records
            .iter()
            .map(|(&id, record)| (id, record.localname.clone()))
            .collect()
    });
    write_partitioning(out, &mp, localnames.as_ref())?;

    Ok(BuildPartitioningReport {
        out: out.clone(),
        levels: mp
            .levels()
            .iter()
            .map(|p| (p.tau_min(), p.len()))
            .collect(),
        total_cells: mp.total_cells(),
        samples_used: training.len(),
        dropped_not_in_forest: remapped.dropped_not_in_forest,
        dropped_by_area_filter,
        without_address: remapped.without_address,
    })
}

// ---------------------------------------------------------------------------
// assign

#[derive(Debug)]
pub struct AssignReport {
    pub out: PathBuf,
    pub rows: usize,
    pub assigned_per_level: Vec<usize>,
    pub unassignable: usize,
}

impl AssignReport {
    pub fn render(&self) -> String {
        let mut rows = vec![vec!["level".to_string(), "assigned".to_string()]];
        for (level, count) in self.assigned_per_level.iter().enumerate() {
            rows.push(vec![level.to_string(), count.to_string()]);
        }
        let mut text = tables::render(&rows);
        text.push_str(&format!(
            "{} samples, {} unassignable at every level\nassignments file {}\n",
            self.rows,
            self.unassignable,
            self.out.display()
        ));
        text
    }
}

pub fn cmd_assign(config: &PipelineConfig) -> Result<AssignReport> {
    let dataset_path = require(&config.dataset, "--dataset")?;
    let forest_path = require(&config.forest, "--forest")?;
    let partitioning_path = require(&config.partitioning, "--partitioning")?;
    let out = require(&config.out, "--out")?;

    let forest = read_forest(forest_path)?;
    let mp = read_partitioning(partitioning_path)?;
    let (samples, _) = read_dataset(dataset_path, config.error_budget)?;

    // assignment is pure per sample; the worker pool keeps row order
    let assign_sample = |sample: &GeoSample| -> CellAssignment {
        let per_level = match &sample.address {
            Some(address) => match forest.remap(address) {
                Ok(remapped) => assign_multi(&remapped, &mp),
                Err(_) => vec![None; mp.n_levels()],
            },
            None => vec![None; mp.n_levels()],
        };
        CellAssignment {
            sample_id: sample.sample_id.clone(),
            per_level,
        }
    };
    let assignments: Vec<CellAssignment> = if config.jobs == 1 {
        samples.iter().map(assign_sample).collect()
    } else {
        worker_pool(config.jobs)?.install(|| samples.par_iter().map(assign_sample).collect())
    };

    let mut writer = BufWriter::new(File::create(out)?);
    write!(writer, "sample_id")?;
    for level in 0..mp.n_levels() {
        write!(writer, "\tcell_l{level}")?;
    }
    writeln!(writer)?;

    let mut assigned_per_level = vec![0usize; mp.n_levels()];
    let mut unassignable = 0usize;
    for assignment in &assignments {
        write!(writer, "{}", assignment.sample_id)?;
        let mut any = false;
        for (level, cell) in assignment.per_level.iter().enumerate() {
            match cell {
                Some(cell) => {
                    assigned_per_level[level] += 1;
                    any = true;
                    write!(writer, "\t{cell}")?;
                }
                None => write!(writer, "\t-")?,
            }
        }
        writeln!(writer)?;
        if !any {
            unassignable += 1;
        }
    }
    writer.flush()?;

    Ok(AssignReport {
        out: out.clone(),
        rows: assignments.len(),
        assigned_per_level,
        unassignable,
    })
}

fn worker_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Debug)]
pub struct EvaluateReport {
    pub out: PathBuf,
    pub tables: Vec<(String, AccuracyTable)>,
    pub samples_evaluated: usize,
    pub samples_excluded: usize,
}

impl EvaluateReport {
    pub fn render(&self) -> String {
        let mut rows = Vec::new();
        let mut header = vec!["predictor".to_string()];
        if let Some((_, table)) = self.tables.first() {
            for entry in &table.entries {
                header.push(format!("a@{}km [%]", entry.radius_km));
            }
        }
        rows.push(header);
        for (name, table) in &self.tables {
            let mut row = vec![name.clone()];
            for entry in &table.entries {
                row.push(tables::fixed(entry.accuracy * 100.0, 1));
            }
            rows.push(row);
        }
        let mut text = tables::render(&rows);
        text.push_str(&format!(
            "{} samples evaluated, {} excluded\naccuracy file {}\n",
            self.samples_evaluated,
            self.samples_excluded,
            self.out.display()
        ));
        text
    }
}

pub fn cmd_evaluate(config: &PipelineConfig) -> Result<EvaluateReport> {
    let dataset_path = require(&config.dataset, "--dataset")?;
    let partitioning_path = require(&config.partitioning, "--partitioning")?;
    let out = require(&config.out, "--out")?;

    let mp = read_partitioning(partitioning_path)?;
    let (samples, _) = read_dataset(dataset_path, config.error_budget)?;

    let mut records: Vec<(&'static str, GeoCoordinate, PredictionRecord)> = Vec::new();
    let mut excluded = 0usize;
    let mut evaluated_ids = 0usize;
    let push = |records: &mut Vec<(&'static str, GeoCoordinate, PredictionRecord)>,
                    predictor: &'static str,
                    sample_id: &str,
                    ground_truth: GeoCoordinate,
                    prediction: Prediction| {
        records.push((
            predictor,
            ground_truth,
            PredictionRecord {
                sample_id: sample_id.to_string(),
                predicted_cell: prediction.cell,
                predicted_coordinate: prediction.coordinate,
                gcd_error_km: Some(great_circle_distance(ground_truth, prediction.coordinate)),
            },
        ));
    };

    match &config.probabilities {
        Some(probabilities_path) => {
            let by_id: HashMap<&str, GeoCoordinate> = samples
                .iter()
                .map(|s| (s.sample_id.as_str(), s.coordinate))
                .collect();
            let reader = read_probabilities(probabilities_path, &mp, config.renormalize)?;
            for row in reader {
                let (sample_id, probs): (String, LevelProbabilities) = row?;
                let Some(&ground_truth) = by_id.get(sample_id.as_str()) else {
                    return Err(Error::Format(format!(
                        "probability row '{sample_id}' has no dataset sample"
                    )));
                };
                evaluated_ids += 1;
                let flat = flat_predict(&probs, &mp)?;
                push(&mut records, "f", &sample_id, ground_truth, flat);
                if config.hierarchical {
                    let starred = hierarchical_predict(&probs, &mp)?;
                    push(&mut records, "f*", &sample_id, ground_truth, starred);
                }
            }
            if evaluated_ids == 0 {
                return Err(Error::EmptyInput("probability file holds no rows"));
            }
        }
        None => {
            // assignment-based evaluation: predict the center of the finest
            // cell each sample's own address lands in
            let forest_path = require(&config.forest, "--forest (needed without --probabilities)")?;
            let forest = read_forest(forest_path)?;
            let remapped = remap_dataset(&forest, &samples);
            excluded += remapped.dropped_not_in_forest + remapped.without_address;
            for (sample_id, ground_truth, address) in &remapped.samples {
                match assign(address, mp.finest()) {
                    Some(cell) => {
                        evaluated_ids += 1;
                        let coordinate = mp.finest().center(cell).expect("center per cell");
                        push(
                            &mut records,
                            "center",
                            sample_id,
                            *ground_truth,
                            Prediction { cell, coordinate },
                        );
                    }
                    None => excluded += 1,
                }
            }
            if evaluated_ids == 0 {
                return Err(Error::EmptyInput("no sample could be assigned to a cell"));
            }
        }
    }

    let mut predictor_names: Vec<&'static str> = Vec::new();
    for (name, ..) in &records {
        if !predictor_names.contains(name) {
            predictor_names.push(name);
        }
    }
    let mut accuracy_tables = Vec::new();
    for name in &predictor_names {
        let pairs: Vec<(GeoCoordinate, GeoCoordinate)> = records
            .iter()
            .filter(|(n, ..)| n == name)
            .map(|(_, gt, record)| (*gt, record.predicted_coordinate))
            .collect();
        accuracy_tables.push((name.to_string(), accuracy_at(&pairs, &config.radii_km)?));
    }

    let mut writer = BufWriter::new(File::create(out)?);
    writeln!(writer, "predictor\tradius_km\taccuracy\tn")?;
    for (name, table) in &accuracy_tables {
        for entry in &table.entries {
            writeln!(
                writer,
                "{name}\t{}\t{}\t{}",
                entry.radius_km, entry.accuracy, entry.n
            )?;
        }
    }
    writer.flush()?;

    if let Some(predictions_path) = &config.predictions_out {
        let mut writer = BufWriter::new(File::create(predictions_path)?);
        writeln!(
            writer,
            "sample_id\tpredictor\tcell\tlat\tlon\tgcd_error_km"
        )?;
        for (name, _, record) in &records {
            writeln!(
                writer,
                "{}\t{name}\t{}\t{}\t{}\t{}",
                record.sample_id,
                record.predicted_cell,
                record.predicted_coordinate.lat_deg(),
                record.predicted_coordinate.lon_deg(),
                record.gcd_error_km.expect("error computed at push"),
            )?;
        }
        writer.flush()?;
    }

    Ok(EvaluateReport {
        out: out.clone(),
        tables: accuracy_tables,
        samples_evaluated: evaluated_ids,
        samples_excluded: excluded,
    })
}

// ---------------------------------------------------------------------------
// ci

#[derive(Debug)]
pub struct CiReport {
    pub out: PathBuf,
    pub images: usize,
    pub records: usize,
    pub filtered_below_s_min: usize,
    pub params: CiParams,
}

impl CiReport {
    pub fn render(&self) -> String {
        format!(
            "{} images scored with k={} beta={} s_min={}\n{} records written ({} concept pairs below s_min)\nrecords file {}\n",
            self.images,
            self.params.k,
            self.params.beta,
            self.params.s_min,
            self.records,
            self.filtered_below_s_min,
            self.out.display()
        )
    }
}

struct ManifestRow {
    sample_id: String,
    explanation: PathBuf,
    segmentation: PathBuf,
    gcd_error_km: f64,
}

fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| {
            Error::Format(format!(
                "{}: header lacks required column '{name}'",
                path.display()
            ))
        })
    };
    let id_col = column("sample_id")?;
    let e_col = column("explanation")?;
    let s_col = column("segmentation")?;
    let err_col = column("gcd_error_km")?;

    let resolve = |text: &str| {
        let p = PathBuf::from(text);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            reason: e.to_string(),
        })?;
        let field = |col: usize, what: &str| -> Result<String> {
            Ok(record
                .get(col)
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 2,
                    reason: format!("missing {what}"),
                })?
                .trim()
                .to_string())
        };
        rows.push(ManifestRow {
            sample_id: field(id_col, "sample_id")?,
            explanation: resolve(&field(e_col, "explanation")?),
            segmentation: resolve(&field(s_col, "segmentation")?),
            gcd_error_km: field(err_col, "gcd_error_km")?.parse().map_err(|_| {
                Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 2,
                    reason: "bad gcd_error_km".into(),
                }
            })?,
        });
    }
    Ok(rows)
}

pub fn cmd_ci(config: &PipelineConfig) -> Result<CiReport> {
    let manifest_path = require(&config.manifest, "--manifest")?;
    let out = require(&config.out, "--out")?;
    let rows = read_manifest(manifest_path)?;
    let params = CiParams {
        k: config.k,
        beta: config.beta,
        s_min: config.s_min,
        ..CiParams::default()
    };

    let score_row = |row: &ManifestRow| -> Result<(Vec<CiRecord>, usize)> {
        let explanation = read_explanation(&row.explanation)?;
        let segmentation = read_pgm(&row.segmentation)?;
        let mut records = Vec::new();
        let mut filtered = 0usize;
        for concept in segmentation.distinct_labels() {
            match ci_score(&explanation, &segmentation, concept, &params)? {
                Some(score) => records.push(CiRecord {
                    sample_id: row.sample_id.clone(),
                    concept,
                    relative_size: score.relative_size,
                    tki: score.tki,
                    ci: score.ci,
                    gcd_error_km: row.gcd_error_km,
                }),
                None => filtered += 1,
            }
        }
        Ok((records, filtered))
    };

    // scored in parallel, collected in manifest order
    let results: Vec<Result<(Vec<CiRecord>, usize)>> = if config.jobs == 1 {
        rows.iter().map(score_row).collect()
    } else {
        worker_pool(config.jobs)?.install(|| rows.par_iter().map(score_row).collect())
    };

    let mut records = Vec::new();
    let mut filtered_below_s_min = 0usize;
    for result in results {
        let (mut row_records, filtered) = result?;
        records.append(&mut row_records);
        filtered_below_s_min += filtered;
    }
    write_ci_records(out, &records)?;

    Ok(CiReport {
        out: out.clone(),
        images: rows.len(),
        records: records.len(),
        filtered_below_s_min,
        params,
    })
}

// ---------------------------------------------------------------------------
// ci-aggregate

#[derive(Debug)]
pub struct CiAggregateReport {
    pub out: PathBuf,
    pub aggregates: Vec<CiAggregate>,
    pub labels: HashMap<u16, String>,
    pub min_images: usize,
    pub warning: Option<String>,
}

impl CiAggregateReport {
    pub fn render(&self) -> String {
        let mut intervals: Vec<Interval> = Vec::new();
        for a in &self.aggregates {
            if !intervals.iter().any(|iv| iv == &a.interval) {
                intervals.push(a.interval);
            }
        }
        let mut header = vec!["concept".to_string()];
        for interval in &intervals {
            header.push(format!("median {interval}"));
            header.push(format!("mean {interval}"));
            header.push(format!("|s| {interval}"));
        }
        let mut rows = vec![header];
        let mut concepts: Vec<u16> = self.aggregates.iter().map(|a| a.concept).collect();
        concepts.sort_unstable();
        concepts.dedup();
        for concept in concepts {
            let mut row = vec![concept_name(&self.labels, concept)];
            for interval in &intervals {
                match self
                    .aggregates
                    .iter()
                    .find(|a| a.concept == concept && &a.interval == interval)
                {
                    Some(a) => {
                        row.push(tables::fixed(a.median, 2));
                        row.push(tables::fixed(a.mean, 2));
                        row.push(a.count.to_string());
                    }
                    None => {
                        row.push("-".into());
                        row.push("-".into());
                        row.push("-".into());
                    }
                }
            }
            rows.push(row);
        }
        let mut text = tables::render(&rows);
        if let Some(warning) = &self.warning {
            text.push_str(&format!("warning: {warning}\n"));
        }
        text.push_str(&format!("aggregate file {}\n", self.out.display()));
        text
    }
}

pub fn cmd_ci_aggregate(config: &PipelineConfig) -> Result<CiAggregateReport> {
    let records_path = require(&config.records, "--records")?;
    let out = require(&config.out, "--out")?;
    let records = read_ci_records(records_path)?;
    let labels = load_labels(config.labels.as_ref())?;
    let aggregates = aggregate(&records, &config.intervals, config.min_images)?;
    write_ci_aggregates(out, &aggregates)?;
    let warning = if aggregates.is_empty() {
        Some(format!(
            "no (concept, interval) group reaches min_images = {} over {} records",
            config.min_images,
            records.len()
        ))
    } else {
        None
    };
    Ok(CiAggregateReport {
        out: out.clone(),
        aggregates,
        labels,
        min_images: config.min_images,
        warning,
    })
}

// ---------------------------------------------------------------------------
// beta-delta

#[derive(Debug)]
pub struct BetaDeltaReport {
    pub out: PathBuf,
    pub deltas: Vec<BetaDelta>,
    pub labels: HashMap<u16, String>,
}

impl BetaDeltaReport {
    pub fn render(&self) -> String {
        let mut intervals: Vec<Interval> = Vec::new();
        for d in &self.deltas {
            if !intervals.iter().any(|iv| iv == &d.interval) {
                intervals.push(d.interval);
            }
        }
        let mut header = vec!["concept".to_string()];
        for interval in &intervals {
            header.push(format!("delta {interval}"));
        }
        let mut rows = vec![header];
        let mut concepts: Vec<u16> = self.deltas.iter().map(|d| d.concept).collect();
        concepts.sort_unstable();
        concepts.dedup();
        for concept in concepts {
            let mut row = vec![concept_name(&self.labels, concept)];
            for interval in &intervals {
                match self
                    .deltas
                    .iter()
                    .find(|d| d.concept == concept && &d.interval == interval)
                {
                    Some(d) => row.push(format!("{:+.2}", d.delta_median)),
                    None => row.push("-".into()),
                }
            }
            rows.push(row);
        }
        let mut text = tables::render(&rows);
        text.push_str(&format!("delta file {}\n", self.out.display()));
        text
    }
}

pub fn cmd_beta_delta(config: &PipelineConfig) -> Result<BetaDeltaReport> {
    let with_path = require(&config.with_dilation, "--with-dilation")?;
    let without_path = require(&config.without_dilation, "--without-dilation")?;
    let out = require(&config.out, "--out")?;
    let dilated = read_ci_aggregates(with_path)?;
    let undilated = read_ci_aggregates(without_path)?;
    let labels = load_labels(config.labels.as_ref())?;
    let deltas = beta_delta(&dilated, &undilated)?;

    let mut writer = BufWriter::new(File::create(out)?);
    writeln!(writer, "concept\tlo_km\thi_km\tdelta_median")?;
    for d in &deltas {
        writeln!(
            writer,
            "{}\t{}\t{}\t{}",
            d.concept, d.interval.lo_km, d.interval.hi_km, d.delta_median
        )?;
    }
    writer.flush()?;

    Ok(BetaDeltaReport {
        out: out.clone(),
        deltas,
        labels,
    })
}
