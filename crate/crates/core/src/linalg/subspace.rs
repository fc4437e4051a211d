//! Principal angles and distances between subspaces given by orthonormal bases.

use super::matrix::DenseMatrix;
use super::svd::svd_of;
use crate::error::{GameError, Result};

/// Tolerance on `QᵀQ = I` when validating orthonormal bases.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// How principal angles are folded into a single distance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GrassmannMetric {
    /// `||theta||_2`, the geodesic (arc length) distance.
    #[default]
    Geodesic,
    /// `||sin theta||_2`, the projection/chordal distance.
    Chordal,
}

pub fn check_orthonormal(q: &DenseMatrix, what: &str) -> Result<()> {
    let q = q.as_nalgebra();
    let k = q.ncols();
    if k > q.nrows() {
        return Err(GameError::validation(format!(
            "{what}: {k} columns cannot be orthonormal in dimension {}",
            q.nrows()
        )));
    }
    let gram = q.transpose() * q;
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    if !(worst <= ORTHONORMAL_TOL) {
        return Err(GameError::validation(format!(
            "{what} does not have orthonormal columns (max |QᵀQ - I| = {worst:.3e})"
        )));
    }
    Ok(())
}

/// Principal angles between `span(u)` and `span(v)`, nondecreasing, in radians.
///
/// Both bases must live in the same ambient dimension; the result has
/// `min(k_u, k_v)` entries.
pub fn principal_angles(u: &DenseMatrix, v: &DenseMatrix) -> Result<Vec<f64>> {
    if u.rows() != v.rows() {
        return Err(GameError::shape(
            format!("bases in dimension {}", u.rows()),
            format!("{}", v.rows()),
        ));
    }
    check_orthonormal(u, "first basis")?;
    check_orthonormal(v, "second basis")?;
    // Angles are symmetric, so let `v` be the narrower basis.
    let (u, v) = if u.cols() < v.cols() {
        (v.as_nalgebra(), u.as_nalgebra())
    } else {
        (u.as_nalgebra(), v.as_nalgebra())
    };
    let cross = u.transpose() * v;
    let mut cosines = svd_of(&cross)?.singular_values().to_vec();
    cosines.sort_by(|a, b| b.total_cmp(a));
    // acos loses half the digits near zero; small angles come from the sines instead.
    let residual = v - u * &cross;
    let mut sines = svd_of(&residual)?.singular_values().to_vec();
    sines.sort_by(|a, b| a.total_cmp(b));
    Ok(cosines
        .into_iter()
        .zip(sines)
        .map(|(c, s)| {
            if c * c >= 0.5 {
                s.clamp(0.0, 1.0).asin()
            } else {
                c.clamp(0.0, 1.0).acos()
            }
        })
        .collect())
}

/// Geodesic Grassmann distance, the l2 norm of the principal angles.
pub fn grassmann_distance(u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    grassmann_distance_with(u, v, GrassmannMetric::Geodesic)
}

pub fn grassmann_distance_with(
    u: &DenseMatrix,
    v: &DenseMatrix,
    metric: GrassmannMetric,
) -> Result<f64> {
    let angles = principal_angles(u, v)?;
    let sum_sq: f64 = match metric {
        GrassmannMetric::Geodesic => angles.iter().map(|t| t * t).sum(),
        GrassmannMetric::Chordal => angles.iter().map(|t| t.sin().powi(2)).sum(),
    };
    Ok(sum_sq.sqrt())
}

/// `min_R ||q_hat R - q_star||_F` over orthogonal `R`.
///
/// Closed form: `sqrt(2r - 2 ||q_hatᵀ q_star||_*)`, evaluated as
/// `||2 sin(theta / 2)||_2` over the principal angles to avoid cancellation.
pub fn procrustes_subspace_error(q_hat: &DenseMatrix, q_star: &DenseMatrix) -> Result<f64> {
    if q_hat.shape() != q_star.shape() {
        return Err(GameError::shape(
            format!("basis of shape {}x{}", q_star.rows(), q_star.cols()),
            format!("{}x{}", q_hat.rows(), q_hat.cols()),
        ));
    }
    let sum_sq: f64 = principal_angles(q_hat, q_star)?
        .iter()
        .map(|t| (2.0 * (t / 2.0).sin()).powi(2))
        .sum();
    Ok(sum_sq.sqrt())
}
