//! Thin SVD (exact and randomized) and singular value soft-thresholding.

use nalgebra::DMatrix;

use super::matrix::DenseMatrix;
use crate::error::{GameError, Result};
use crate::rng;

/// Default oversampling for the randomized range finder.
pub const DEFAULT_OVERSAMPLE: usize = 10;
/// Default number of power (subspace) iterations for the randomized SVD.
pub const DEFAULT_POWER_ITERS: usize = 2;
/// Singular values below this fraction of the largest count as zero in rank decisions.
pub const RANK_REL_TOL: f64 = 1e-12;

/// `A = U diag(S) Vᵀ` with `k` retained components.
///
/// Singular values are nonincreasing. Each left singular vector is sign-fixed
/// so that its largest-magnitude entry is positive (the paired right vector
/// is flipped with it), which makes factor output reproducible.
#[derive(Clone, Debug, PartialEq)]
pub struct ThinSvd {
    u: DenseMatrix,
    s: Vec<f64>,
    v: DenseMatrix,
}

impl ThinSvd {
    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn k(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let u = self.u.as_nalgebra();
        let v = self.v.as_nalgebra();
        let mut us = u.clone();
        for (j, s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        DenseMatrix::wrap(us * v.transpose())
    }

    /// Leading `r` right singular vectors as an `m x r` orthonormal basis.
    pub fn right_basis(&self, r: usize) -> Result<DenseMatrix> {
        if r == 0 || r > self.k() {
            return Err(GameError::validation(format!(
                "requested {r} right singular vectors, only {} available",
                self.k()
            )));
        }
        Ok(DenseMatrix::wrap(self.v.as_nalgebra().columns(0, r).into_owned()))
    }

    /// Number of singular values above `rel_tol * sigma_1`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let top = self.s.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&s| s > rel_tol * top).count()
    }

    fn from_parts(mut u: DMatrix<f64>, s: Vec<f64>, mut v: DMatrix<f64>) -> Self {
        // sort descending, then fix signs
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        if order.iter().enumerate().any(|(i, &j)| i != j) {
            u = u.select_columns(order.iter());
            v = v.select_columns(order.iter());
        }
        let s: Vec<f64> = order.iter().map(|&j| s[j].max(0.0)).collect();
        for j in 0..s.len() {
            let col = u.column(j);
            let mut best = 0;
            for i in 1..col.len() {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            if col[best] < 0.0 {
                u.column_mut(j).neg_mut();
                v.column_mut(j).neg_mut();
            }
        }
        ThinSvd {
            u: DenseMatrix::wrap(u),
            s,
            v: DenseMatrix::wrap(v),
        }
    }
}

pub(crate) fn svd_of(a: &DMatrix<f64>) -> Result<ThinSvd> {
    let (n, m) = a.shape();
    let svd = faer::Mat::<f64>::from_fn(n, m, |i, j| a[(i, j)])
        .thin_svd()
        .map_err(|_| GameError::SvdFailure)?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let k = s.dim();
    let u = DMatrix::from_fn(n, k, |i, j| u[(i, j)]);
    let v = DMatrix::from_fn(m, k, |i, j| v[(i, j)]);
    let s: Vec<f64> = (0..k).map(|i| s[i]).collect();
    if s.iter().any(|x| !x.is_finite()) {
        return Err(GameError::SvdFailure);
    }
    Ok(ThinSvd::from_parts(u, s, v))
}

/// Thin SVD with `k = min(rows, cols)`.
pub fn svd_full(a: &DenseMatrix) -> Result<ThinSvd> {
    a.ensure_finite("SVD input")?;
    svd_of(a.as_nalgebra())
}

/// Randomized rank-`k` SVD (Gaussian range finder with power iterations).
///
/// The sketch is drawn from a generator seeded with `seed`, so the result is
/// bitwise reproducible.
pub fn svd_truncated(
    a: &DenseMatrix,
    k: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<ThinSvd> {
    a.ensure_finite("SVD input")?;
    let (n, m) = a.shape();
    let max_rank = n.min(m);
    if k == 0 || k > max_rank {
        return Err(GameError::validation(format!(
            "truncation rank {k} outside 1..={max_rank}"
        )));
    }
    truncated_of(a.as_nalgebra(), k, oversample, power_iters, seed)
}

pub(crate) fn truncated_of(
    a: &DMatrix<f64>,
    k: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<ThinSvd> {
    let (n, m) = a.shape();
    let l = (k + oversample).min(n.min(m));
    let mut rng = rng::seeded(seed);
    let omega = DenseMatrix::random_normal(m, l, &mut rng).into_nalgebra();

    let mut q = (a * omega).qr().q();
    for _ in 0..power_iters {
        let z = (a.transpose() * &q).qr().q();
        q = (a * z).qr().q();
    }
    let b = q.transpose() * a;
    let small = svd_of(&b)?;
    let u = &q * small.u.as_nalgebra().columns(0, k);
    let v = small.v.as_nalgebra().columns(0, k).into_owned();
    let s = small.s[..k].to_vec();
    Ok(ThinSvd::from_parts(u, s, v))
}

/// Rebuilds `U diag(max(S - tau, 0)) Vᵀ` from a decomposition.
pub(crate) fn shrink(svd: &ThinSvd, tau: f64, rows: usize, cols: usize) -> DMatrix<f64> {
    let keep = svd.s.iter().take_while(|&&s| s > tau).count();
    if keep == 0 {
        return DMatrix::zeros(rows, cols);
    }
    let mut us = svd.u.as_nalgebra().columns(0, keep).into_owned();
    for j in 0..keep {
        us.column_mut(j).scale_mut(svd.s[j] - tau);
    }
    us * svd.v.as_nalgebra().columns(0, keep).transpose()
}

pub(crate) fn soft_threshold_of(a: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if tau == 0.0 {
        return Ok(a.clone());
    }
    let svd = svd_of(a)?;
    Ok(shrink(&svd, tau, a.nrows(), a.ncols()))
}

/// Singular value soft-thresholding, the proximal map of `tau * ||.||_*`.
pub fn soft_threshold_svd(a: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(GameError::validation(format!(
            "threshold must be a finite nonnegative number, got {tau}"
        )));
    }
    a.ensure_finite("SVT input")?;
    soft_threshold_of(a.as_nalgebra(), tau).map(DenseMatrix::wrap)
}

pub(crate) fn nuclear_norm_of(a: &DMatrix<f64>) -> f64 {
    a.singular_values().iter().sum()
}

/// Sum of singular values.
pub fn nuclear_norm(a: &DenseMatrix) -> Result<f64> {
    a.ensure_finite("nuclear norm input")?;
    Ok(nuclear_norm_of(a.as_nalgebra()))
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    a.ensure_finite("spectral norm input")?;
    Ok(a.as_nalgebra().singular_values().max())
}
