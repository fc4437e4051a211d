//! The group-aware objective, its proximal machinery, and the solvers.

mod baseline;
mod config;
mod game;
mod objective;
mod prox;
mod tuning;

pub use baseline::{solve_global_svt, solve_global_svt_observed, SvtConfig};
pub use config::{
    CategoryFactors, CompletionResult, SolverConfig, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL,
    DEFAULT_STOP_WINDOW,
};
pub use game::{solve_game, solve_game_observed};
pub use objective::{loss, loss_gradient, objective};
pub use prox::{clip_spikiness, prox_average_step, prox_group, step_size_from_accuracy};
pub use tuning::{log_grid, select_by_holdout, GridSelection};

/// Relative objective change below `rel_tol` for `window` consecutive iterations.
pub(crate) struct Stopping {
    rel_tol: f64,
    window: usize,
    below: usize,
}

impl Stopping {
    pub(crate) fn new(rel_tol: f64, window: usize) -> Self {
        Stopping {
            rel_tol,
            window,
            below: 0,
        }
    }

    pub(crate) fn update(&mut self, trace: &[f64]) -> bool {
        let t = trace.len();
        if t < 2 {
            return false;
        }
        let (prev, cur) = (trace[t - 2], trace[t - 1]);
        let delta = (cur - prev).abs();
        let rel = if delta == 0.0 {
            0.0
        } else {
            delta / prev.abs().max(f64::MIN_POSITIVE)
        };
        if rel < self.rel_tol {
            self.below += 1;
        } else {
            self.below = 0;
        }
        self.below >= self.window
    }
}
