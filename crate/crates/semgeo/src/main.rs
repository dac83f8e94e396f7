use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semgeo::partitioning::CenterMode;
use semgeo::pipeline::{self, parse_intervals, parse_list, PipelineConfig};

/// Semantic geo-partitioning and concept-influence analysis.
///
/// Configuration precedence: command-line flags > environment variables
/// (SEMGEO_*) > --config file > built-in defaults. Exit codes: 0 success,
/// 2 configuration error, 3 input-data error, 4 service error.
#[derive(Parser)]
#[command(name = "semgeo", version, about)]
struct Cli {
    /// TOML config file with defaults for any parameter
    #[arg(long, global = true, env = "SEMGEO_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the location forest from a dataset's address vectors
    BuildHierarchy(BuildHierarchyArgs),
    /// Construct a multi-level partitioning over a forest
    BuildPartitioning(BuildPartitioningArgs),
    /// Assign dataset samples to the cells of a partitioning
    Assign(AssignArgs),
    /// Evaluate predictions with accuracy-at-radius
    Evaluate(EvaluateArgs),
    /// Score concept influence for explanation/segmentation raster pairs
    Ci(CiArgs),
    /// Aggregate concept-influence records into spatial error intervals
    CiAggregate(CiAggregateArgs),
    /// Difference of aggregated medians between two dilation settings
    BetaDelta(BetaDeltaArgs),
}

#[derive(Args)]
struct BuildHierarchyArgs {
    /// Dataset file (sample_id,lat,lon[,address])
    #[arg(long, env = "SEMGEO_DATASET")]
    dataset: PathBuf,
    /// Output forest file
    #[arg(long)]
    out: PathBuf,
    /// Drop locations carried by fewer samples than this before building
    /// [default: 50]
    #[arg(long, env = "SEMGEO_TAU_INITIAL")]
    tau_initial: Option<u64>,
    /// Tolerated malformed dataset rows [default: 100]
    #[arg(long, env = "SEMGEO_ERROR_BUDGET")]
    error_budget: Option<usize>,
    /// Reverse geocode rows that lack an address column
    #[arg(long)]
    geocode: bool,
    #[command(flatten)]
    geocode_options: GeocodeOptions,
}

#[derive(Args)]
struct GeocodeOptions {
    /// Base URL of the Nominatim-compatible service
    /// [default: https://nominatim.openstreetmap.org]
    #[arg(long, env = "SEMGEO_GEOCODE_URL")]
    geocode_url: Option<String>,
    /// Response cache directory [default: geocode-cache]
    #[arg(long, env = "SEMGEO_GEOCODE_CACHE")]
    geocode_cache: Option<PathBuf>,
    /// User-agent header sent to the service
    #[arg(long, env = "SEMGEO_GEOCODE_USER_AGENT")]
    geocode_user_agent: Option<String>,
    /// Request timeout in seconds [default: 10]
    #[arg(long, env = "SEMGEO_GEOCODE_TIMEOUT_S")]
    geocode_timeout_s: Option<u64>,
    /// Minimum milliseconds between requests [default: 1000]
    #[arg(long, env = "SEMGEO_GEOCODE_INTERVAL_MS")]
    geocode_interval_ms: Option<u64>,
}

#[derive(Args)]
struct BuildPartitioningArgs {
    #[arg(long, env = "SEMGEO_DATASET")]
    dataset: PathBuf,
    /// Forest file from build-hierarchy
    #[arg(long, env = "SEMGEO_FOREST")]
    forest: PathBuf,
    /// Output partitioning file
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated minimum sample counts, fine to coarse
    /// [default: 100,125,250]
    #[arg(long, env = "SEMGEO_TAUS")]
    taus: Option<String>,
    /// Location metadata store (JSONL); enables localnames and --area-filter
    #[arg(long, env = "SEMGEO_METADATA")]
    metadata: Option<PathBuf>,
    /// Keep only locations whose metadata marks them as areas
    #[arg(long)]
    area_filter: bool,
    /// Cell center computation: spherical or arithmetic [default: spherical]
    #[arg(long, env = "SEMGEO_CENTER_MODE")]
    center_mode: Option<String>,
    #[arg(long, env = "SEMGEO_ERROR_BUDGET")]
    error_budget: Option<usize>,
}

#[derive(Args)]
struct AssignArgs {
    #[arg(long, env = "SEMGEO_DATASET")]
    dataset: PathBuf,
    #[arg(long, env = "SEMGEO_FOREST")]
    forest: PathBuf,
    #[arg(long, env = "SEMGEO_PARTITIONING")]
    partitioning: PathBuf,
    /// Output assignments file
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses all cores [default: 0]
    #[arg(long, env = "SEMGEO_JOBS")]
    jobs: Option<usize>,
    #[arg(long, env = "SEMGEO_ERROR_BUDGET")]
    error_budget: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Ground-truth dataset
    #[arg(long, env = "SEMGEO_DATASET")]
    dataset: PathBuf,
    #[arg(long, env = "SEMGEO_PARTITIONING")]
    partitioning: PathBuf,
    /// Output accuracy table
    #[arg(long)]
    out: PathBuf,
    /// Per-sample class probabilities; without it, samples are assigned by
    /// address and scored at their own cell center (requires --forest)
    #[arg(long, env = "SEMGEO_PROBABILITIES")]
    probabilities: Option<PathBuf>,
    #[arg(long, env = "SEMGEO_FOREST")]
    forest: Option<PathBuf>,
    /// Also score the hierarchical predictor f* next to flat f
    #[arg(long)]
    hierarchical: bool,
    /// Accept probability rows that need renormalization
    #[arg(long)]
    renormalize: bool,
    /// Comma-separated radii in km [default: 1,25,200,750,2500]
    #[arg(long, env = "SEMGEO_RADII")]
    radii: Option<String>,
    /// Also write per-sample predictions to this file
    #[arg(long)]
    predictions_out: Option<PathBuf>,
    #[arg(long, env = "SEMGEO_ERROR_BUDGET")]
    error_budget: Option<usize>,
}

#[derive(Args)]
struct CiArgs {
    /// Manifest (sample_id,explanation,segmentation,gcd_error_km)
    #[arg(long, env = "SEMGEO_MANIFEST")]
    manifest: PathBuf,
    /// Output concept-influence records
    #[arg(long)]
    out: PathBuf,
    /// Number of top explanation pixels [default: 1000]
    #[arg(long, env = "SEMGEO_K")]
    k: Option<usize>,
    /// Concept mask dilation radius in pixels [default: 0]
    #[arg(long, env = "SEMGEO_BETA")]
    beta: Option<u32>,
    /// Minimum relative concept size [default: 0.05]
    #[arg(long, env = "SEMGEO_S_MIN")]
    s_min: Option<f64>,
    /// Worker threads; 0 uses all cores [default: 0]
    #[arg(long, env = "SEMGEO_JOBS")]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CiAggregateArgs {
    /// Concept-influence records from `semgeo ci`
    #[arg(long, env = "SEMGEO_RECORDS")]
    records: PathBuf,
    /// Output aggregate table
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated half-open error intervals in km
    /// [default: 0-25,25-750,750-2500]
    #[arg(long, env = "SEMGEO_INTERVALS")]
    intervals: Option<String>,
    /// Minimum records per (concept, interval) group [default: 50]
    #[arg(long, env = "SEMGEO_MIN_IMAGES")]
    min_images: Option<usize>,
    /// Optional `label<TAB>name` file for readable concept names
    #[arg(long, env = "SEMGEO_LABELS")]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct BetaDeltaArgs {
    /// Aggregate table computed with dilation (e.g. beta=3)
    #[arg(long)]
    with_dilation: PathBuf,
    /// Aggregate table computed without dilation (beta=0)
    #[arg(long)]
    without_dilation: PathBuf,
    /// Output delta table
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "SEMGEO_LABELS")]
    labels: Option<PathBuf>,
}

fn build_config(cli: &Cli) -> semgeo::Result<PipelineConfig> {
    let mut config = PipelineConfig::default();
    if let Some(path) = &cli.config {
        config.merge_file(path)?;
    }

    match &cli.command {
        Command::BuildHierarchy(args) => {
            config.dataset = Some(args.dataset.clone());
            config.out = Some(args.out.clone());
            if let Some(v) = args.tau_initial {
                config.tau_initial = v;
            }
            if let Some(v) = args.error_budget {
                config.error_budget = v;
            }
            config.geocode |= args.geocode;
            if let Some(v) = &args.geocode_options.geocode_url {
                config.geocode_url = v.clone();
            }
            if let Some(v) = &args.geocode_options.geocode_cache {
                config.geocode_cache = v.clone();
            }
            if let Some(v) = &args.geocode_options.geocode_user_agent {
                config.geocode_user_agent = Some(v.clone());
            }
            if let Some(v) = args.geocode_options.geocode_timeout_s {
                config.geocode_timeout_s = v;
            }
            if let Some(v) = args.geocode_options.geocode_interval_ms {
                config.geocode_interval_ms = v;
            }
        }
        Command::BuildPartitioning(args) => {
            config.dataset = Some(args.dataset.clone());
            config.forest = Some(args.forest.clone());
            config.out = Some(args.out.clone());
            if let Some(text) = &args.taus {
                config.taus = parse_list(text, "tau")?;
            }
            config.metadata = args.metadata.clone();
            config.area_filter |= args.area_filter;
            if let Some(text) = &args.center_mode {
                config.center_mode = text.parse::<CenterMode>()?;
            }
            if let Some(v) = args.error_budget {
                config.error_budget = v;
            }
        }
        Command::Assign(args) => {
            config.dataset = Some(args.dataset.clone());
            config.forest = Some(args.forest.clone());
            config.partitioning = Some(args.partitioning.clone());
            config.out = Some(args.out.clone());
            if let Some(v) = args.jobs {
                config.jobs = v;
            }
            if let Some(v) = args.error_budget {
                config.error_budget = v;
            }
        }
        Command::Evaluate(args) => {
            config.dataset = Some(args.dataset.clone());
            config.partitioning = Some(args.partitioning.clone());
            config.out = Some(args.out.clone());
            config.probabilities = args.probabilities.clone();
            config.forest = args.forest.clone();
            config.hierarchical |= args.hierarchical;
            config.renormalize |= args.renormalize;
            if let Some(text) = &args.radii {
                config.radii_km = parse_list(text, "radius")?;
            }
            config.predictions_out = args.predictions_out.clone();
            if let Some(v) = args.error_budget {
                config.error_budget = v;
            }
        }
        Command::Ci(args) => {
            config.manifest = Some(args.manifest.clone());
            config.out = Some(args.out.clone());
            if let Some(v) = args.k {
                config.k = v;
            }
            if let Some(v) = args.beta {
                config.beta = v;
            }
            if let Some(v) = args.s_min {
                config.s_min = v;
            }
            if let Some(v) = args.jobs {
                config.jobs = v;
            }
        }
        Command::CiAggregate(args) => {
            config.records = Some(args.records.clone());
            config.out = Some(args.out.clone());
            if let Some(text) = &args.intervals {
                config.intervals = parse_intervals(text)?;
            }
            if let Some(v) = args.min_images {
                config.min_images = v;
            }
            config.labels = args.labels.clone();
        }
        Command::BetaDelta(args) => {
            config.with_dilation = Some(args.with_dilation.clone());
            config.without_dilation = Some(args.without_dilation.clone());
            config.out = Some(args.out.clone());
            config.labels = args.labels.clone();
        }
    }
    Ok(config)
}

fn run(cli: &Cli) -> semgeo::Result<String> {
    let config = build_config(cli)?;
    match &cli.command {
        Command::BuildHierarchy(_) => Ok(pipeline::cmd_build_hierarchy(&config)?.render()),
        Command::BuildPartitioning(_) => Ok(pipeline::cmd_build_partitioning(&config)?.render()),
        Command::Assign(_) => Ok(pipeline::cmd_assign(&config)?.render()),
        Command::Evaluate(_) => Ok(pipeline::cmd_evaluate(&config)?.render()),
        Command::Ci(_) => Ok(pipeline::cmd_ci(&config)?.render()),
        Command::CiAggregate(_) => Ok(pipeline::cmd_ci_aggregate(&config)?.render()),
        Command::BetaDelta(_) => Ok(pipeline::cmd_beta_delta(&config)?.render()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
