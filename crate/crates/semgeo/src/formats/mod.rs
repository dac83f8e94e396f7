//! On-disk formats: dataset tables, location metadata, raster images,
//! probability files, and the forest/partitioning serializations.
//!
//! Every writer here produces output its matching reader round-trips
//! bit-exactly, and all output is deterministic given identical inputs, so
//! files can be golden-tested and diffed.

mod ci_io;
mod dataset;
mod hierarchy_io;
mod netpbm;
mod probabilities;
mod records;

pub use ci_io::{
    read_ci_aggregates, read_ci_records, write_ci_aggregates, write_ci_records, AGGREGATE_HEADER,
    RECORDS_HEADER,
};
pub use dataset::{read_dataset, write_dataset, DatasetReadStats, DatasetReader, GeoSample};
pub use hierarchy_io::{read_forest, read_partitioning, write_forest, write_partitioning};
pub use netpbm::{
    read_explanation, read_pfm, read_pgm, write_pfm, write_pfm_with, write_pgm, PfmEndianness,
};
pub use probabilities::{read_probabilities, write_probabilities, ProbabilityReader};
pub use records::{read_records, write_records, LocationRecord};
