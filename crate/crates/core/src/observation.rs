//! Observation masks and the projection onto observed entries.
//!
//! A mask is a binary set of observed `(row, col)` cells. Duplicate cells
//! collapse to one, so a mask never encodes repeated observations.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{GameError, Result};
use crate::linalg::DenseMatrix;
use crate::rng;

#[derive(Debug, Clone)]
pub struct ObservationMask {
    rows: usize,
    cols: usize,
    /// Sorted row-major, unique.
    observed: Vec<(usize, usize)>,
    bitmap: OnceLock<Vec<bool>>,
}

impl PartialEq for ObservationMask {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.observed == other.observed
    }
}

impl Eq for ObservationMask {}

impl ObservationMask {
    pub fn new(
        rows: usize,
        cols: usize,
        cells: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(GameError::validation("mask dimensions must be positive"));
        }
        let mut observed = Vec::new();
        for (i, j) in cells {
            if i >= rows || j >= cols {
                return Err(GameError::validation(format!(
                    "observed cell ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            observed.push((i, j));
        }
        observed.sort_unstable();
        observed.dedup();
        Ok(Self::from_sorted(rows, cols, observed))
    }

    fn from_sorted(rows: usize, cols: usize, observed: Vec<(usize, usize)>) -> Self {
        ObservationMask {
            rows,
            cols,
            observed,
            bitmap: OnceLock::new(),
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "mask dimensions must be positive");
        let observed = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .collect();
        Self::from_sorted(rows, cols, observed)
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "mask dimensions must be positive");
        Self::from_sorted(rows, cols, Vec::new())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn fraction_observed(&self) -> f64 {
        self.len() as f64 / (self.rows * self.cols) as f64
    }

    /// Observed cells in row-major order.
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.observed
    }

    fn bitmap(&self) -> &[bool] {
        self.bitmap.get_or_init(|| {
            let mut bits = vec![false; self.rows * self.cols];
            for &(i, j) in &self.observed {
                bits[i * self.cols + j] = true;
            }
            bits
        })
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.rows && col < self.cols && self.bitmap()[row * self.cols + col]
    }

    /// Observed count inside the given rows, `|Ω ∩ (rows × [m])|`.
    pub fn count_in_rows(&self, rows: &[usize]) -> usize {
        let mut in_set = vec![false; self.rows];
        for &r in rows {
            if r < self.rows {
                in_set[r] = true;
            }
        }
        self.observed.iter().filter(|(i, _)| in_set[*i]).count()
    }

    pub fn union(&self, other: &ObservationMask) -> Result<ObservationMask> {
        self.ensure_same_shape(other)?;
        let cells = self.observed.iter().chain(&other.observed).copied();
        ObservationMask::new(self.rows, self.cols, cells)
    }

    pub fn intersection(&self, other: &ObservationMask) -> Result<ObservationMask> {
        self.ensure_same_shape(other)?;
        let observed = self
            .observed
            .iter()
            .copied()
            .filter(|&(i, j)| other.contains(i, j))
            .collect();
        Ok(Self::from_sorted(self.rows, self.cols, observed))
    }

    fn ensure_same_shape(&self, other: &ObservationMask) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(GameError::shape(
                format!("mask of shape {}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }

    pub fn ensure_matches(&self, a: &DenseMatrix, what: &str) -> Result<()> {
        if self.shape() != a.shape() {
            return Err(GameError::shape(
                format!("{what} of shape {}x{} (mask shape)", self.rows, self.cols),
                format!("{}x{}", a.rows(), a.cols()),
            ));
        }
        Ok(())
    }

    /// 0/1 indicator matrix of the observed set.
    pub(crate) fn indicator(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(i, j) in &self.observed {
            m[(i, j)] = 1.0;
        }
        m
    }
}

/// `P_Ω(A)`: keeps observed entries, zeroes the rest.
pub fn project_observed(mask: &ObservationMask, a: &DenseMatrix) -> Result<DenseMatrix> {
    mask.ensure_matches(a, "matrix")?;
    let src = a.as_nalgebra();
    let mut out = DMatrix::zeros(mask.rows, mask.cols);
    for &(i, j) in &mask.observed {
        out[(i, j)] = src[(i, j)];
    }
    Ok(DenseMatrix::wrap(out))
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GameError::validation(format!(
            "{what} must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

/// Keeps each cell independently with probability `keep_prob`.
///
/// Cells are visited in row-major order, one uniform draw per cell.
pub fn sample_uniform_mask(
    rows: usize,
    cols: usize,
    keep_prob: f64,
    seed: u64,
) -> Result<ObservationMask> {
    check_probability(keep_prob, "keep probability")?;
    if rows == 0 || cols == 0 {
        return Err(GameError::validation("mask dimensions must be positive"));
    }
    let mut g = rng::seeded(seed);
    let mut observed = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            if g.random::<f64>() < keep_prob {
                observed.push((i, j));
            }
        }
    }
    Ok(ObservationMask::from_sorted(rows, cols, observed))
}

/// Drops observed cells in `target_rows` independently with probability `drop_prob`.
///
/// Cells outside the target rows are never touched.
pub fn mask_block_rows(
    base: &ObservationMask,
    target_rows: &[usize],
    drop_prob: f64,
    seed: u64,
) -> Result<ObservationMask> {
    check_probability(drop_prob, "drop probability")?;
    let mut in_target = vec![false; base.rows];
    for &r in target_rows {
        if r >= base.rows {
            return Err(GameError::validation(format!(
                "target row {r} outside a matrix with {} rows",
                base.rows
            )));
        }
        in_target[r] = true;
    }
    let mut g = rng::seeded(seed);
    let observed = base
        .observed
        .iter()
        .copied()
        .filter(|&(i, _)| !in_target[i] || g.random::<f64>() >= drop_prob)
        .collect();
    Ok(ObservationMask::from_sorted(base.rows, base.cols, observed))
}

/// Splits the observed set into disjoint train and test masks.
///
/// The test set has exactly `round(test_frac * |mask|)` cells, chosen by a
/// seeded shuffle.
pub fn split_holdout(
    mask: &ObservationMask,
    test_frac: f64,
    seed: u64,
) -> Result<(ObservationMask, ObservationMask)> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(GameError::validation(format!(
            "test fraction must lie in (0, 1), got {test_frac}"
        )));
    }
    let n_test = (test_frac * mask.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..mask.len()).collect();
    order.shuffle(&mut rng::seeded(seed));
    let mut is_test = vec![false; mask.len()];
    for &k in &order[..n_test] {
        is_test[k] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (k, &cell) in mask.observed.iter().enumerate() {
        if is_test[k] {
            test.push(cell);
        } else {
            train.push(cell);
        }
    }
    Ok((
        ObservationMask::from_sorted(mask.rows, mask.cols, train),
        ObservationMask::from_sorted(mask.rows, mask.cols, test),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_matrix(n: usize, m: usize, seed: u64) -> DenseMatrix {
        DenseMatrix::random_normal(n, m, &mut rng::seeded(seed))
    }

    #[test]
    fn full_mask_keeps_everything() {
        let a = random_matrix(4, 3, 1);
        assert_eq!(project_observed(&ObservationMask::full(4, 3), &a).unwrap(), a);
    }

    #[test]
    fn empty_mask_gives_zeros() {
        let a = random_matrix(4, 3, 1);
        let p = project_observed(&ObservationMask::empty(4, 3), &a).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn projection_shape_mismatch() {
        let a = random_matrix(4, 3, 1);
        assert!(project_observed(&ObservationMask::full(3, 3), &a).is_err());
    }

    #[test]
    fn constructor_validates_and_dedups() {
        assert!(ObservationMask::new(2, 2, [(2, 0)]).is_err());
        let m = ObservationMask::new(2, 2, [(1, 1), (0, 1), (1, 1)]).unwrap();
        assert_eq!(m.cells(), &[(0, 1), (1, 1)]);
        assert!(m.contains(1, 1) && !m.contains(0, 0));
    }

    #[test]
    fn uniform_mask_extremes() {
        assert_eq!(sample_uniform_mask(5, 4, 1.0, 3).unwrap(), ObservationMask::full(5, 4));
        assert!(sample_uniform_mask(5, 4, 0.0, 3).unwrap().is_empty());
        assert!(sample_uniform_mask(5, 4, 1.5, 3).is_err());
        assert!(sample_uniform_mask(5, 4, -0.1, 3).is_err());
    }

    #[test]
    fn uniform_mask_mean_fraction() {
        let mean: f64 = (0..30)
            .map(|s| sample_uniform_mask(1000, 100, 0.4, s).unwrap().fraction_observed())
            .sum::<f64>()
            / 30.0;
        assert!((mean - 0.4).abs() < 0.01, "{mean}");
    }

    #[test]
    fn uniform_mask_is_deterministic() {
        assert_eq!(
            sample_uniform_mask(30, 20, 0.3, 9).unwrap(),
            sample_uniform_mask(30, 20, 0.3, 9).unwrap()
        );
    }

    #[test]
    fn per_block_counts_concentrate() {
        // N_c ~ Binomial(n_c * m, p); check each seed within 3 sigma
        let (n, m, p) = (200, 50, 0.4);
        let block: Vec<usize> = (50..110).collect();
        let trials = (block.len() * m) as f64;
        let sd = (trials * p * (1.0 - p)).sqrt();
        for seed in 0..30 {
            let mask = sample_uniform_mask(n, m, p, seed).unwrap();
            let count = mask.count_in_rows(&block) as f64;
            assert!((count - p * trials).abs() <= 3.0 * sd, "seed {seed}: {count}");
        }
    }

    #[test]
    fn block_masking_extremes() {
        let base = ObservationMask::full(6, 4);
        assert_eq!(mask_block_rows(&base, &[1, 2], 0.0, 1).unwrap(), base);
        let dropped = mask_block_rows(&base, &[1, 2], 1.0, 1).unwrap();
        assert_eq!(dropped.count_in_rows(&[1, 2]), 0);
        assert_eq!(dropped.len(), 16);
        assert!(mask_block_rows(&base, &[6], 0.5, 1).is_err());
        assert!(mask_block_rows(&base, &[0], 1.1, 1).is_err());
    }

    #[test]
    fn holdout_rounding() {
        let mask = ObservationMask::full(100, 100);
        let (train, test) = split_holdout(&mask, 0.1, 5).unwrap();
        assert_eq!(test.len(), 1000);
        assert_eq!(train.len(), 9000);
        assert!(split_holdout(&mask, 0.0, 5).is_err());
        assert!(split_holdout(&mask, 1.0, 5).is_err());
    }

    #[test]
    fn holdout_is_deterministic() {
        let mask = sample_uniform_mask(20, 20, 0.5, 2).unwrap();
        assert_eq!(split_holdout(&mask, 0.3, 7).unwrap(), split_holdout(&mask, 0.3, 7).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn projection_is_idempotent_self_adjoint_and_contractive(
            n in 1usize..8, m in 1usize..8, p in 0.0f64..1.0, seed in any::<u64>()
        ) {
            let mask = sample_uniform_mask(n, m, p, seed).unwrap();
            let a = random_matrix(n, m, seed ^ 1);
            let b = random_matrix(n, m, seed ^ 2);
            let pa = project_observed(&mask, &a).unwrap();
            prop_assert_eq!(project_observed(&mask, &pa).unwrap(), pa.clone());
            let lhs = pa.inner(&b);
            let rhs = a.inner(&project_observed(&mask, &b).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-10);
            prop_assert!(pa.frobenius_norm() <= a.frobenius_norm());
        }

        #[test]
        fn holdout_partitions_the_mask(p in 0.05f64..1.0, frac in 0.01f64..0.99, seed in any::<u64>()) {
            let mask = sample_uniform_mask(15, 12, p, seed).unwrap();
            let (train, test) = split_holdout(&mask, frac, seed).unwrap();
            prop_assert!(train.intersection(&test).unwrap().is_empty());
            prop_assert_eq!(train.union(&test).unwrap(), mask.clone());
            prop_assert_eq!(test.len(), (frac * mask.len() as f64).round() as usize);
        }

        #[test]
        fn block_masking_is_local(drop in 0.0f64..=1.0, seed in any::<u64>()) {
            let base = sample_uniform_mask(12, 6, 0.7, seed).unwrap();
            let target: Vec<usize> = (3..7).collect();
            let out = mask_block_rows(&base, &target, drop, seed).unwrap();
            for i in (0..12).filter(|i| !target.contains(i)) {
                for j in 0..6 {
                    prop_assert_eq!(out.contains(i, j), base.contains(i, j));
                }
            }
            prop_assert!(out.intersection(&base).unwrap() == out);
        }
    }
}
