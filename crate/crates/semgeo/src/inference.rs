//! Scoring of externally produced per-level class probabilities: flat and
//! hierarchical cell prediction, the multi-level cross-entropy value, and the
//! crop-averaging helper.

use crate::error::{Error, Result};
use crate::geo::GeoCoordinate;
use crate::hierarchy::LocationId;
use crate::partitioning::MultiPartitioning;

/// Tolerance on probability-vector sums.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// One probability vector per partitioning level, each indexed by that
/// level's canonical cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelProbabilities {
    per_level: Vec<Vec<f64>>,
}

impl LevelProbabilities {
    /// Validates lengths against the partitioning, non-negativity, and unit
    /// sums (within [`SUM_TOLERANCE`]).
    pub fn new(per_level: Vec<Vec<f64>>, mp: &MultiPartitioning) -> Result<Self> {
        if per_level.len() != mp.n_levels() {
            return Err(Error::ShapeMismatch {
                level: 0,
                expected: mp.n_levels(),
                got: per_level.len(),
            });
        }
        for (level, vector) in per_level.iter().enumerate() {
            if vector.len() != mp.level(level).len() {
                return Err(Error::ShapeMismatch {
                    level,
                    expected: mp.level(level).len(),
                    got: vector.len(),
                });
            }
            if vector.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "probabilities at level {level} must be finite and non-negative"
                )));
            }
            let sum: f64 = vector.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::NotNormalized { level, sum });
            }
        }
        Ok(Self { per_level })
    }

    /// Wraps vectors without the unit-sum check. Used for renormalized input
    /// and for intermediate values such as crop sums.
    pub fn new_unnormalized(per_level: Vec<Vec<f64>>) -> Self {
        Self { per_level }
    }

    pub fn n_levels(&self) -> usize {
        self.per_level.len()
    }

    pub fn level(&self, i: usize) -> &[f64] {
        &self.per_level[i]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.per_level
    }
}

/// A predicted cell together with its representative coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub cell: LocationId,
    pub coordinate: GeoCoordinate,
}

/// Per-sample prediction row as written by the evaluation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub predicted_cell: LocationId,
    pub predicted_coordinate: GeoCoordinate,
    /// Filled in once ground truth is known.
    pub gcd_error_km: Option<f64>,
}

fn check_shapes(probs: &LevelProbabilities, mp: &MultiPartitioning) -> Result<()> {
    if probs.n_levels() != mp.n_levels() {
        return Err(Error::ShapeMismatch {
            level: 0,
            expected: mp.n_levels(),
            got: probs.n_levels(),
        });
    }
    for level in 0..mp.n_levels() {
        if probs.level(level).len() != mp.level(level).len() {
            return Err(Error::ShapeMismatch {
                level,
                expected: mp.level(level).len(),
                got: probs.level(level).len(),
            });
        }
    }
    Ok(())
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Highest-probability cell of the finest level. Ties go to the earlier cell
/// in canonical order.
pub fn flat_predict(probs: &LevelProbabilities, mp: &MultiPartitioning) -> Result<Prediction> {
    check_shapes(probs, mp)?;
    let finest = mp.finest();
    let index = argmax(probs.level(0));
    Ok(Prediction {
        cell: finest.cell_at(index),
        coordinate: finest.center_at(index),
    })
}

/// Scores every finest cell by the product of its own probability and the
/// probabilities of its mapped cell at every coarser level, then takes the
/// argmax with the same tie-break as [`flat_predict`].
pub fn hierarchical_predict(
    probs: &LevelProbabilities,
    mp: &MultiPartitioning,
) -> Result<Prediction> {
    check_shapes(probs, mp)?;
    let finest = mp.finest();
    let mut scores = Vec::with_capacity(finest.len());
    for index in 0..finest.len() {
        let mut score = probs.level(0)[index];
        let mut cell = finest.cell_at(index);
        for level in 1..mp.n_levels() {
            cell = mp
                .parent_cell(level - 1, cell)
                .ok_or(Error::MissingParentCell {
                    cell,
                    fine: level - 1,
                    coarse: level,
                })?;
            let coarse_index =
                mp.level(level)
                    .cell_index(cell)
                    .ok_or(Error::CellNotInLevel { cell, level })?;
            score *= probs.level(level)[coarse_index];
        }
        scores.push(score);
    }
    let index = argmax(&scores);
    Ok(Prediction {
        cell: finest.cell_at(index),
        coordinate: finest.center_at(index),
    })
}

/// Sum over levels of the negative log-probability assigned to the true cell.
///
/// A zero probability at a true cell yields `f64::INFINITY`; callers treat
/// that as a reportable condition rather than an error.
pub fn multi_level_cross_entropy(
    probs: &LevelProbabilities,
    true_cells: &[LocationId],
    mp: &MultiPartitioning,
) -> Result<f64> {
    check_shapes(probs, mp)?;
    if true_cells.len() != mp.n_levels() {
        return Err(Error::ShapeMismatch {
            level: 0,
            expected: mp.n_levels(),
            got: true_cells.len(),
        });
    }
    let mut total = 0.0;
    for (level, &cell) in true_cells.iter().enumerate() {
        let index = mp
            .level(level)
            .cell_index(cell)
            .ok_or(Error::CellNotInLevel { cell, level })?;
        let p = probs.level(level)[index];
        if p <= 0.0 {
            return Ok(f64::INFINITY);
        }
        total -= p.ln();
    }
    Ok(total)
}

/// Element-wise mean over several probability sets, e.g. the five-crop
/// predictions averaged at inference time.
pub fn mean_probabilities(crops: &[LevelProbabilities]) -> Result<LevelProbabilities> {
    let first = crops
        .first()
        .ok_or(Error::EmptyInput("probability sets to average"))?;
    let mut acc: Vec<Vec<f64>> = first.levels().to_vec();
    for crop in &crops[1..] {
        if crop.n_levels() != first.n_levels() {
            return Err(Error::ShapeMismatch {
                level: 0,
                expected: first.n_levels(),
                got: crop.n_levels(),
            });
        }
        for (level, vector) in crop.levels().iter().enumerate() {
            if vector.len() != acc[level].len() {
                return Err(Error::ShapeMismatch {
                    level,
                    expected: acc[level].len(),
                    got: vector.len(),
                });
            }
            for (slot, value) in acc[level].iter_mut().zip(vector) {
                *slot += value;
            }
        }
    }
    let n = crops.len() as f64;
    for vector in &mut acc {
        for value in vector.iter_mut() {
            *value /= n;
        }
    }
    Ok(LevelProbabilities::new_unnormalized(acc))
}
