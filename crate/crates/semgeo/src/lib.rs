//! Semantic geographic partitioning and concept-influence analysis.
//!
//! The crate covers two connected workflows:
//!
//! 1. **Semantic partitioning** — build a location hierarchy from
//!    reverse-geocoded address vectors ([`hierarchy`]), derive single- and
//!    multi-level classification cells from it ([`partitioning`]), score
//!    externally produced class probabilities ([`inference`]), and evaluate
//!    predictions with great-circle accuracy-at-radius ([`geo`]).
//! 2. **Concept influence** — given an explanation raster and a segmentation
//!    raster for an image, measure how much each visual concept contributed
//!    to the prediction and aggregate the scores across a dataset
//!    ([`concept`]).
//!
//! File formats and the reverse-geocoding client live in [`formats`] and
//! [`geocode`]; [`pipeline`] wires everything into the `semgeo` command-line
//! front-end. Each major capability has a runnable program under
//! `examples/`.

pub mod concept;
pub mod error;
pub mod formats;
pub mod geo;
pub mod geocode;
pub mod hierarchy;
pub mod inference;
pub mod partitioning;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
