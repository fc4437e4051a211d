//! Group-aware matrix completion.
//!
//! Estimates a partially observed matrix `X` by minimizing
//!
//! ```text
//! ½ ||P_Ω(X - W)||_F² + λ Σ_c α_c ||W_c||_*
//! ```
//!
//! where each `W_c` is the block of rows belonging to a (possibly
//! overlapping) meta-category `c`. The solver combines one singular value
//! thresholding step per category through a proximal average, with optional
//! Nesterov acceleration.
//!
//! ```
//! use game_core::prelude::*;
//!
//! let x = DenseMatrix::from_fn(6, 4, |i, j| (i as f64 + 1.0) * (j as f64 + 1.0));
//! let mask = sample_uniform_mask(6, 4, 0.7, 1).unwrap();
//! let groups = GroupStructure::new(6, vec![
//!     Category::new("first", 0..4),
//!     Category::new("second", 2..6),
//! ]).unwrap();
//! let fit = solve_game(&x, &mask, &groups, &SolverConfig::with_lambda(0.1)).unwrap();
//! assert!(fit.final_objective() <= fit.objective_trace[0]);
//! ```

pub mod error;
pub mod eval;
pub mod groups;
pub mod io;
pub mod linalg;
pub mod observation;
pub mod rng;
pub mod solver;

pub use error::{GameError, Result};
pub use eval::LabelVector;
pub use groups::{Category, GroupStructure};
pub use linalg::{DenseMatrix, ThinSvd};
pub use observation::ObservationMask;
pub use solver::{CompletionResult, SolverConfig, SvtConfig};

pub mod prelude {
    pub use crate::eval::{
        adjusted_rand_index, kmeans, normalized_mutual_information, per_group_subspace_error,
        rmse_on,
    };
    pub use crate::groups::{normalize_weights, validate_cover};
    pub use crate::linalg::{
        grassmann_distance, principal_angles, procrustes_subspace_error, soft_threshold_svd,
        svd_full, svd_truncated,
    };
    pub use crate::observation::{mask_block_rows, project_observed, sample_uniform_mask, split_holdout};
    pub use crate::solver::{objective, prox_group, solve_game, solve_global_svt};
    pub use crate::{
        Category, CompletionResult, DenseMatrix, GameError, GroupStructure, LabelVector,
        ObservationMask, SolverConfig, SvtConfig, ThinSvd,
    };
}
