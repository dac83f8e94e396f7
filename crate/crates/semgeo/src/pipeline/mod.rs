//! End-to-end pipeline commands behind the `semgeo` command-line front-end.
//!
//! Every command is a plain function over a [`PipelineConfig`]; the binary
//! only parses flags into the config and prints the returned report. All
//! machine-readable outputs are deterministic: rerunning a command on
//! identical inputs produces byte-identical files.

mod commands;
mod tables;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::concept::Interval;
use crate::error::{Error, Result};
use crate::partitioning::CenterMode;

pub use commands::{
    cmd_assign, cmd_beta_delta, cmd_build_hierarchy, cmd_build_partitioning, cmd_ci,
    cmd_ci_aggregate, cmd_evaluate, AssignReport, BetaDeltaReport, BuildHierarchyReport,
    BuildPartitioningReport, CiAggregateReport, CiReport, EvaluateReport,
};

/// All pipeline inputs, outputs, and parameters in one place.
///
/// Defaults follow the reference setup: `k = 1000`, `s_min = 0.05`,
/// `beta = 0`, radii `{1, 25, 200, 750, 2500}` km, error intervals
/// `{[0,25), [25,750), [750,2500)}`, thresholds `{100, 125, 250}`, initial
/// location filter `50`, and a minimum of `50` images per aggregate.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    // file paths, per command
    pub dataset: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub forest: Option<PathBuf>,
    pub partitioning: Option<PathBuf>,
    pub probabilities: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub with_dilation: Option<PathBuf>,
    pub without_dilation: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub predictions_out: Option<PathBuf>,

    // parameters
    pub taus: Vec<u64>,
    pub tau_initial: u64,
    pub k: usize,
    pub beta: u32,
    pub s_min: f64,
    pub radii_km: Vec<f64>,
    pub intervals: Vec<Interval>,
    pub min_images: usize,
    pub error_budget: usize,
    pub jobs: usize,

    // flags
    pub area_filter: bool,
    pub hierarchical: bool,
    pub center_mode: CenterMode,
    pub renormalize: bool,
    pub geocode: bool,

    // geocoding service
    pub geocode_url: String,
    pub geocode_cache: PathBuf,
    pub geocode_user_agent: Option<String>,
    pub geocode_timeout_s: u64,
    pub geocode_interval_ms: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            metadata: None,
            forest: None,
            partitioning: None,
            probabilities: None,
            manifest: None,
            records: None,
            with_dilation: None,
            without_dilation: None,
            labels: None,
            out: None,
            predictions_out: None,
            taus: vec![100, 125, 250],
            tau_initial: 50,
            k: 1000,
            beta: 0,
            s_min: 0.05,
            radii_km: vec![1.0, 25.0, 200.0, 750.0, 2500.0],
            intervals: crate::concept::standard_intervals(),
            min_images: 50,
            error_budget: 100,
            jobs: 0,
            area_filter: false,
            hierarchical: false,
            center_mode: CenterMode::Spherical,
            renormalize: false,
            geocode: false,
            geocode_url: "https://nominatim.openstreetmap.org".into(),
            geocode_cache: PathBuf::from("geocode-cache"),
            geocode_user_agent: None,
            geocode_timeout_s: 10,
            geocode_interval_ms: 1000,
        }
    }
}

impl PipelineConfig {
    pub fn geocode_config(&self) -> crate::geocode::GeocodeConfig {
        let mut config = crate::geocode::GeocodeConfig::new(self.geocode_cache.clone());
        config.base_url = self.geocode_url.clone();
        if let Some(agent) = &self.geocode_user_agent {
            config.user_agent = agent.clone();
        }
        config.timeout = Duration::from_secs(self.geocode_timeout_s);
        config.min_interval = Duration::from_millis(self.geocode_interval_ms);
        config
    }

    /// Applies values from a TOML config file; explicit flags and
    /// environment variables take precedence over the file.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        let file: ConfigFile =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(taus) = file.taus {
            self.taus = taus;
        }
        if let Some(v) = file.tau_initial {
            self.tau_initial = v;
        }
        if let Some(v) = file.k {
            self.k = v;
        }
        if let Some(v) = file.beta {
            self.beta = v;
        }
        if let Some(v) = file.s_min {
            self.s_min = v;
        }
        if let Some(v) = file.radii_km {
            self.radii_km = v;
        }
        if let Some(text) = file.intervals {
            self.intervals = parse_intervals(&text)?;
        }
        if let Some(v) = file.min_images {
            self.min_images = v;
        }
        if let Some(v) = file.error_budget {
            self.error_budget = v;
        }
        if let Some(v) = file.jobs {
            self.jobs = v;
        }
        if let Some(v) = file.area_filter {
            self.area_filter = v;
        }
        if let Some(v) = file.hierarchical {
            self.hierarchical = v;
        }
        if let Some(text) = file.center_mode {
            self.center_mode = text.parse()?;
        }
        if let Some(v) = file.renormalize {
            self.renormalize = v;
        }
        if let Some(v) = file.geocode {
            self.geocode = v;
        }
        if let Some(v) = file.geocode_url {
            self.geocode_url = v;
        }
        if let Some(v) = file.geocode_cache {
            self.geocode_cache = v;
        }
        if let Some(v) = file.geocode_user_agent {
            self.geocode_user_agent = Some(v);
        }
        if let Some(v) = file.geocode_timeout_s {
            self.geocode_timeout_s = v;
        }
        if let Some(v) = file.geocode_interval_ms {
            self.geocode_interval_ms = v;
        }
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    taus: Option<Vec<u64>>,
    tau_initial: Option<u64>,
    k: Option<usize>,
    beta: Option<u32>,
    s_min: Option<f64>,
    radii_km: Option<Vec<f64>>,
    intervals: Option<String>,
    min_images: Option<usize>,
    error_budget: Option<usize>,
    jobs: Option<usize>,
    area_filter: Option<bool>,
    hierarchical: Option<bool>,
    center_mode: Option<String>,
    renormalize: Option<bool>,
    geocode: Option<bool>,
    geocode_url: Option<String>,
    geocode_cache: Option<PathBuf>,
    geocode_user_agent: Option<String>,
    geocode_timeout_s: Option<u64>,
    geocode_interval_ms: Option<u64>,
}

/// Parses `0-25,25-750,750-2500` into half-open intervals.
pub fn parse_intervals(text: &str) -> Result<Vec<Interval>> {
    text.split(',')
        .map(|piece| {
            let (lo, hi) = piece
                .trim()
                .split_once('-')
                .ok_or_else(|| Error::Config(format!("bad interval '{piece}'")))?;
            let lo: f64 = lo
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad interval '{piece}'")))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad interval '{piece}'")))?;
            Interval::new(lo, hi)
        })
        .collect()
}

/// Parses a comma-separated list of numbers.
pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|piece| {
            piece
                .trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("bad {what} '{piece}'")))
        })
        .collect()
}

/// Loads an optional `label<TAB>name` file for report rendering.
pub fn load_labels(path: Option<&PathBuf>) -> Result<HashMap<u16, String>> {
    let Some(path) = path else {
        return Ok(HashMap::new());
    };
    let text = std::fs::read_to_string(path)?;
    let mut labels = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, name) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.clone(),
            line: i + 1,
            reason: "expected 'label<TAB>name'".into(),
        })?;
        let id: u16 = id.trim().parse().map_err(|_| Error::Parse {
            path: path.clone(),
            line: i + 1,
            reason: format!("bad label '{id}'"),
        })?;
        labels.insert(id, name.trim().to_string());
    }
    Ok(labels)
}

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    path.as_ref()
        .ok_or_else(|| Error::Config(format!("missing required path: {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_setup() {
        let config = PipelineConfig::default();
        assert_eq!(config.k, 1000);
        assert_eq!(config.s_min, 0.05);
        assert_eq!(config.beta, 0);
        assert_eq!(config.tau_initial, 50);
        assert_eq!(config.taus, vec![100, 125, 250]);
        assert_eq!(config.radii_km, vec![1.0, 25.0, 200.0, 750.0, 2500.0]);
        assert_eq!(config.min_images, 50);
        let intervals: Vec<(f64, f64)> = config
            .intervals
            .iter()
            .map(|i| (i.lo_km, i.hi_km))
            .collect();
        assert_eq!(
            intervals,
            vec![(0.0, 25.0), (25.0, 750.0), (750.0, 2500.0)]
        );
    }

    #[test]
    fn interval_and_list_parsing() {
        let intervals = parse_intervals("0-25, 25-750,750-2500").unwrap();
        assert_eq!(intervals.len(), 3);
        assert!(parse_intervals("25-0").is_err());
        assert!(parse_intervals("what").is_err());
        let taus: Vec<u64> = parse_list("100,125,250", "tau").unwrap();
        assert_eq!(taus, vec![100, 125, 250]);
        assert!(parse_list::<u64>("1,x", "tau").is_err());
    }

    #[test]
    fn config_file_merges_under_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("semgeo.toml");
        std::fs::write(&path, "k = 64\ntaus = [2, 4]\nintervals = \"0-10,10-100\"\n").unwrap();
        let mut config = PipelineConfig::default();
        config.merge_file(&path).unwrap();
        assert_eq!(config.k, 64);
        assert_eq!(config.taus, vec![2, 4]);
        assert_eq!(config.intervals.len(), 2);
        // unknown keys are configuration errors
        std::fs::write(&path, "knob = 1\n").unwrap();
        assert!(config.merge_file(&path).is_err());
    }
}
