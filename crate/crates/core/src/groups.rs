//! Overlapping row categories, row extraction/embedding, and penalty calibration.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{GameError, Result};
use crate::linalg::DenseMatrix;
use crate::observation::ObservationMask;

/// Id given to the synthetic category that absorbs uncovered rows.
pub const CATCH_ALL_ID: &str = "__uncovered__";

/// Tolerance on `Σ α_c = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Category {
    pub id: String,
    /// Sorted, unique row indices.
    pub rows: Vec<usize>,
}

impl Category {
    pub fn new(id: impl Into<String>, rows: impl IntoIterator<Item = usize>) -> Self {
        let mut rows: Vec<usize> = rows.into_iter().collect();
        rows.sort_unstable();
        rows.dedup();
        Category { id: id.into(), rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Meta-categories over the rows of an `n x m` matrix.
///
/// Invariants: every category is nonempty with indices below `n`, ids are
/// unique, every row lies in at least one category, and the weights are
/// nonnegative and sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupStructure {
    n: usize,
    categories: Vec<Category>,
    weights: Vec<f64>,
    kappa: Vec<usize>,
}

fn multiplicities(n: usize, categories: &[Category]) -> Result<Vec<usize>> {
    let mut kappa = vec![0usize; n];
    let mut seen = HashSet::new();
    for c in categories {
        if !seen.insert(c.id.as_str()) {
            return Err(GameError::validation(format!("duplicate category id `{}`", c.id)));
        }
        if c.rows.is_empty() {
            return Err(GameError::validation(format!("category `{}` has no rows", c.id)));
        }
        for &r in &c.rows {
            if r >= n {
                return Err(GameError::validation(format!(
                    "category `{}` lists row {r}, but the matrix has {n} rows",
                    c.id
                )));
            }
            kappa[r] += 1;
        }
    }
    Ok(kappa)
}

/// Row multiplicities and their extremes; fails on the first uncovered row.
pub fn validate_cover(n: usize, categories: &[Category]) -> Result<(usize, usize)> {
    let kappa = multiplicities(n, categories)?;
    kappa_extremes(&kappa)
}

fn kappa_extremes(kappa: &[usize]) -> Result<(usize, usize)> {
    if let Some(row) = kappa.iter().position(|&k| k == 0) {
        return Err(GameError::CoverViolation { row });
    }
    let min = kappa.iter().copied().min().unwrap_or(0);
    let max = kappa.iter().copied().max().unwrap_or(0);
    Ok((min, max))
}

/// `α_c = raw_c / Σ raw`.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if let Some(w) = raw.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(GameError::validation(format!(
            "weights must be finite and nonnegative, got {w}"
        )));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(GameError::validation("weights sum to zero"));
    }
    Ok(raw.iter().map(|w| w / total).collect())
}

impl GroupStructure {
    /// Builds a structure with uniform weights, rejecting uncovered rows.
    pub fn new(n: usize, categories: Vec<Category>) -> Result<Self> {
        if n == 0 {
            return Err(GameError::validation("group structure needs at least one row"));
        }
        if categories.is_empty() {
            return Err(GameError::validation("group structure needs at least one category"));
        }
        let kappa = multiplicities(n, &categories)?;
        kappa_extremes(&kappa)?;
        let weights = vec![1.0 / categories.len() as f64; categories.len()];
        Ok(GroupStructure {
            n,
            categories,
            weights,
            kappa,
        })
    }

    /// Like [`GroupStructure::new`], but rows in no category are gathered
    /// into an extra category named [`CATCH_ALL_ID`].
    pub fn with_catch_all(n: usize, mut categories: Vec<Category>) -> Result<Self> {
        if n == 0 {
            return Err(GameError::validation("group structure needs at least one row"));
        }
        let kappa = multiplicities(n, &categories)?;
        let uncovered: Vec<usize> = (0..n).filter(|&i| kappa[i] == 0).collect();
        if !uncovered.is_empty() {
            categories.push(Category::new(CATCH_ALL_ID, uncovered));
        }
        Self::new(n, categories)
    }

    /// One category containing every row.
    pub fn single(n: usize, id: impl Into<String>) -> Result<Self> {
        Self::new(n, vec![Category::new(id, 0..n)])
    }

    /// Disjoint categories from per-row labels; ids are `prefix{label}`.
    pub fn from_labels(labels: &[usize], prefix: &str) -> Result<Self> {
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            rows[l].push(i);
        }
        let categories = rows
            .into_iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(l, r)| Category::new(format!("{prefix}{l}"), r))
            .collect();
        Self::new(labels.len(), categories)
    }

    /// Replaces the weights with the normalization of `raw`.
    pub fn with_weights(mut self, raw: &[f64]) -> Result<Self> {
        if raw.len() != self.categories.len() {
            return Err(GameError::shape(
                format!("{} weights", self.categories.len()),
                format!("{}", raw.len()),
            ));
        }
        self.weights = normalize_weights(raw)?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.id.as_str())
    }

    /// Per-row multiplicity `κ(i)`.
    pub fn kappa(&self) -> &[usize] {
        &self.kappa
    }

    pub fn kappa_range(&self) -> (usize, usize) {
        kappa_extremes(&self.kappa).expect("cover checked at construction")
    }

    pub fn validate_cover(&self) -> Result<(usize, usize)> {
        validate_cover(self.n, &self.categories)
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.categories
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| GameError::UnknownCategory(id.to_string()))
    }

    pub fn category(&self, id: &str) -> Result<&Category> {
        self.index_of(id).map(|k| &self.categories[k])
    }

    fn ensure_rows(&self, w: &DenseMatrix) -> Result<()> {
        if w.rows() != self.n {
            return Err(GameError::shape(
                format!("matrix with {} rows", self.n),
                format!("{} rows", w.rows()),
            ));
        }
        Ok(())
    }

    /// `W_c = D_c W`, the rows of category `id` in index order.
    pub fn extract_rows(&self, id: &str, w: &DenseMatrix) -> Result<DenseMatrix> {
        let k = self.index_of(id)?;
        self.ensure_rows(w)?;
        Ok(DenseMatrix::wrap(self.extract_at(k, w.as_nalgebra())))
    }

    /// `D_cᵀ B`: rows of category `id` set from `b`, every other row zero.
    pub fn embed_rows(&self, id: &str, b: &DenseMatrix) -> Result<DenseMatrix> {
        let k = self.index_of(id)?;
        let n_c = self.categories[k].len();
        if b.rows() != n_c {
            return Err(GameError::shape(
                format!("{n_c} rows for category `{id}`"),
                format!("{} rows", b.rows()),
            ));
        }
        let mut out = DMatrix::zeros(self.n, b.cols());
        for (local, &global) in self.categories[k].rows.iter().enumerate() {
            out.row_mut(global).copy_from(&b.as_nalgebra().row(local));
        }
        Ok(DenseMatrix::wrap(out))
    }

    pub(crate) fn extract_at(&self, k: usize, w: &DMatrix<f64>) -> DMatrix<f64> {
        w.select_rows(self.categories[k].rows.iter())
    }

    /// Per-category penalty levels from the sampling-based calibration rule:
    ///
    /// `λ_c = a · [ (σ/κ_min) · sqrt((N n_c / n) · ln d_c / min(n_c, m)) + R · ln d_c / κ_min ]`
    ///
    /// with `N = |Ω|` and `d_c = n_c + m`.
    pub fn lambda_heuristic(
        &self,
        mask: &ObservationMask,
        m: usize,
        sigma: f64,
        r: f64,
        scale: f64,
    ) -> Result<Vec<f64>> {
        if !(sigma >= 0.0 && sigma.is_finite()) || !(r >= 0.0 && r.is_finite()) {
            return Err(GameError::validation(format!(
                "noise scales must be finite and nonnegative (sigma = {sigma}, R = {r})"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(GameError::validation(format!("scale must be positive, got {scale}")));
        }
        if m == 0 {
            return Err(GameError::validation("column count must be positive"));
        }
        if mask.rows() != self.n {
            return Err(GameError::shape(
                format!("mask with {} rows", self.n),
                format!("{} rows", mask.rows()),
            ));
        }
        if mask.is_empty() {
            return Err(GameError::validation("observation mask is empty"));
        }
        let (kappa_min, _) = self.kappa_range();
        let kappa_min = kappa_min as f64;
        let big_n = mask.len() as f64;
        let n = self.n as f64;
        Ok(self
            .categories
            .iter()
            .map(|c| {
                let n_c = c.len() as f64;
                let log_d = ((c.len() + m) as f64).ln();
                let r_c = c.len().min(m) as f64;
                let gaussian = sigma / kappa_min * ((big_n * n_c / n) * log_d / r_c).sqrt();
                let tail = r * log_d / kappa_min;
                scale * (gaussian + tail)
            })
            .collect())
    }
}

/// Splits per-category levels into a global level and weights:
/// `λ = Σ λ_c`, `α_c = λ_c / λ`. All-zero levels give `λ = 0` with uniform weights.
pub fn weights_from_lambdas(lambdas: &[f64]) -> Result<(f64, Vec<f64>)> {
    if lambdas.is_empty() {
        return Err(GameError::validation("no per-category levels given"));
    }
    let total: f64 = lambdas.iter().sum();
    if lambdas.iter().all(|&l| l == 0.0) {
        return Ok((0.0, vec![1.0 / lambdas.len() as f64; lambdas.len()]));
    }
    Ok((total, normalize_weights(lambdas)?))
}
