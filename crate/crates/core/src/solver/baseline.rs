//! Global nuclear-norm completion by (accelerated) proximal gradient.
//!
//! Kept free of any category logic so it can serve as a reference for the
//! group-aware solver with a single all-rows category.

use nalgebra::DMatrix;

use super::config::{check_gamma, check_lambda, CompletionResult, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL, DEFAULT_STOP_WINDOW};
use super::Stopping;
use crate::error::{GameError, Result};
use crate::linalg::{soft_threshold_of, DenseMatrix};
use crate::observation::ObservationMask;

#[derive(Clone, Debug)]
pub struct SvtConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub stop_window: usize,
    pub accelerate: bool,
    pub restart: bool,
    pub warm_start: Option<DenseMatrix>,
}

impl Default for SvtConfig {
    fn default() -> Self {
        SvtConfig {
            lambda: 1.0,
            gamma: 1.0,
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            stop_window: DEFAULT_STOP_WINDOW,
            accelerate: true,
            restart: true,
            warm_start: None,
        }
    }
}

impl SvtConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        SvtConfig {
            lambda,
            ..Default::default()
        }
    }
}

/// `½||P_Ω(X - W)||² + λ||W||_*`.
pub fn global_objective(x: &DMatrix<f64>, mask: &ObservationMask, lambda: f64, w: &DMatrix<f64>) -> f64 {
    let mut fit = 0.0;
    for &(i, j) in mask.cells() {
        let r = x[(i, j)] - w[(i, j)];
        fit += r * r;
    }
    let nuclear: f64 = if lambda == 0.0 {
        0.0
    } else {
        w.singular_values().iter().sum()
    };
    0.5 * fit + lambda * nuclear
}

pub fn solve_global_svt(
    x: &DenseMatrix,
    mask: &ObservationMask,
    config: &SvtConfig,
) -> Result<CompletionResult> {
    solve_global_svt_observed(x, mask, config, |_, _| {})
}

pub fn solve_global_svt_observed(
    x: &DenseMatrix,
    mask: &ObservationMask,
    config: &SvtConfig,
    mut observer: impl FnMut(usize, &DenseMatrix),
) -> Result<CompletionResult> {
    check_lambda(config.lambda)?;
    check_gamma(config.gamma)?;
    if !(config.rel_tol > 0.0) || config.stop_window == 0 {
        return Err(GameError::validation("rel_tol and stop window must be positive"));
    }
    x.ensure_finite("data matrix")?;
    mask.ensure_matches(x, "data matrix")?;
    let (n, m) = x.shape();
    let xs = x.as_nalgebra();

    let mut w_old = match &config.warm_start {
        Some(w0) => {
            w0.ensure_shape(n, m, "warm start")?;
            w0.as_nalgebra().clone()
        }
        None => DMatrix::zeros(n, m),
    };
    let mut y = w_old.clone();
    let mut t = 1.0f64;
    let mut trace = vec![global_objective(xs, mask, config.lambda, &w_old)];
    let mut stopping = Stopping::new(config.rel_tol, config.stop_window);
    let mut iters = 0;
    let mut converged = false;

    for k in 1..=config.max_iters {
        let mut z = y.clone();
        for &(i, j) in mask.cells() {
            z[(i, j)] -= config.gamma * (y[(i, j)] - xs[(i, j)]);
        }
        let w = soft_threshold_of(&z, config.lambda * config.gamma)?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(GameError::Divergence { iteration: k });
        }
        trace.push(global_objective(xs, mask, config.lambda, &w));
        iters = k;

        if config.accelerate {
            let len = trace.len();
            let rising = len >= 3 && trace[len - 1] > trace[len - 2] && trace[len - 2] > trace[len - 3];
            if config.restart && rising {
                t = 1.0;
                y = w.clone();
            } else {
                let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
                y = &w + (&w - &w_old) * ((t - 1.0) / t_next);
                t = t_next;
            }
        } else {
            y = w.clone();
        }

        observer(k, &DenseMatrix::wrap(w.clone()));
        w_old = w;
        if stopping.update(&trace) {
            converged = true;
            break;
        }
    }

    Ok(CompletionResult {
        w_hat: DenseMatrix::wrap(w_old),
        objective_trace: trace,
        iters_run: iters,
        converged,
        per_category_svd: None,
    })
}
