//! Dense matrices, SVDs, and subspace geometry.

mod matrix;
mod subspace;
mod svd;

pub use matrix::DenseMatrix;
pub use subspace::{
    check_orthonormal, grassmann_distance, grassmann_distance_with, principal_angles,
    procrustes_subspace_error, GrassmannMetric, ORTHONORMAL_TOL,
};
pub use svd::{
    nuclear_norm, soft_threshold_svd, spectral_norm, svd_full, svd_truncated, ThinSvd,
    DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS, RANK_REL_TOL,
};

pub(crate) use svd::{nuclear_norm_of, shrink, soft_threshold_of, svd_of, truncated_of};
