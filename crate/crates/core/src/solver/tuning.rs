//! Grid selection of a penalty multiplier on held-out observed entries.

use crate::error::{GameError, Result};
use crate::eval::rmse_on;
use crate::linalg::DenseMatrix;
use crate::observation::{split_holdout, ObservationMask};

#[derive(Clone, Debug)]
pub struct GridSelection {
    pub best: f64,
    /// `(candidate, validation RMSE)` in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Fits once per grid value on a fit/validation split of `mask` and keeps the
/// value with the lowest validation RMSE. Ties go to the earlier candidate.
///
/// `fit` receives the fitting mask and a candidate value and returns a
/// completed matrix.
pub fn select_by_holdout<F>(
    x: &DenseMatrix,
    mask: &ObservationMask,
    grid: &[f64],
    validation_frac: f64,
    seed: u64,
    mut fit: F,
) -> Result<GridSelection>
where
    F: FnMut(&ObservationMask, f64) -> Result<DenseMatrix>,
{
    if grid.is_empty() {
        return Err(GameError::validation("empty candidate grid"));
    }
    let (fit_mask, val_mask) = split_holdout(mask, validation_frac, seed)?;
    if val_mask.is_empty() {
        return Err(GameError::validation("validation split is empty"));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &value in grid {
        let w = fit(&fit_mask, value)?;
        scores.push((value, rmse_on(&val_mask, x, &w)?));
    }
    let best = scores
        .iter()
        .fold(None::<(f64, f64)>, |acc, &(v, s)| match acc {
            Some((_, bs)) if bs <= s => acc,
            _ => Some((v, s)),
        })
        .map(|(v, _)| v)
        .expect("grid is nonempty");
    Ok(GridSelection { best, scores })
}

/// Geometric grid of `count` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (ratio * k as f64).exp()).collect()
}
