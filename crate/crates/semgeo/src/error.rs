use std::path::PathBuf;

use crate::hierarchy::LocationId;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("address vector is empty")]
    EmptyAddress,

    #[error("duplicate location {0} in address vector")]
    DuplicateLocation(LocationId),

    #[error("location {0} is not part of the forest")]
    NotInForest(LocationId),

    #[error("partitioning is empty: no location reaches tau_min = {tau_min}")]
    EmptyPartitioning { tau_min: u64 },

    #[error("cell center is degenerate (coordinates cancel on the sphere)")]
    DegenerateCellCenter,

    #[error("cell {cell} at level {level} has no ancestor in the coarser level")]
    NoCoarseAncestor { cell: LocationId, level: usize },

    #[error("probability vector shape mismatch at level {level}: expected {expected}, got {got}")]
    ShapeMismatch {
        level: usize,
        expected: usize,
        got: usize,
    },

    #[error("probability vector at level {level} sums to {sum} (tolerance 1e-6)")]
    NotNormalized { level: usize, sum: f64 },

    #[error("cell {cell} is not a member of level {level}")]
    CellNotInLevel { cell: LocationId, level: usize },

    #[error("no parent mapping for cell {cell} between levels {fine} and {coarse}")]
    MissingParentCell {
        cell: LocationId,
        fine: usize,
        coarse: usize,
    },

    #[error("raster dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("raster contains a non-finite value at index {0}")]
    NonFiniteValue(usize),

    #[error("intervals invalid: {0}")]
    InvalidIntervals(String),

    #[error("aggregate key mismatch: {0}")]
    KeyMismatch(String),

    #[error("parse error in {path}, line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("malformed-row budget ({budget}) exceeded in {path}")]
    ErrorBudgetExceeded { path: PathBuf, budget: usize },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("geocoding service error: {0}")]
    Service(String),

    #[error("unparseable geocoder response: {reason}; body: {body_prefix}")]
    BadResponse { reason: String, body_prefix: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front-end.
    /// 2 = configuration, 3 = input data (including unreadable files),
    /// 4 = external service.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidIntervals(_) => 2,
            Error::Service(_) | Error::BadResponse { .. } => 4,
            _ => 3,
        }
    }
}
