//! PA-APG / PA-PG iterations for the group-aware objective.

use nalgebra::DMatrix;

use super::config::{CategoryFactors, CompletionResult, SolverConfig};
use super::objective::{group_penalty, half_masked_sq};
use super::prox::{clip_in_place, ProxPlan};
use super::Stopping;
use crate::error::{GameError, Result};
use crate::groups::GroupStructure;
use crate::linalg::{svd_of, DenseMatrix};
use crate::observation::ObservationMask;

/// Solves `min_W ½||P_Ω(X - W)||² + λ Σ_c α_c ||W_c||_*` by proximal averaging.
pub fn solve_game(
    x: &DenseMatrix,
    mask: &ObservationMask,
    groups: &GroupStructure,
    config: &SolverConfig,
) -> Result<CompletionResult> {
    solve_game_observed(x, mask, groups, config, |_, _| {})
}

/// [`solve_game`] with a callback receiving `(k, W^k)` after every iteration.
pub fn solve_game_observed(
    x: &DenseMatrix,
    mask: &ObservationMask,
    groups: &GroupStructure,
    config: &SolverConfig,
    mut observer: impl FnMut(usize, &DenseMatrix),
) -> Result<CompletionResult> {
    config.validate()?;
    x.ensure_finite("data matrix")?;
    mask.ensure_matches(x, "data matrix")?;
    if groups.n() != x.rows() {
        return Err(GameError::shape(
            format!("group structure over {} rows", x.rows()),
            format!("{}", groups.n()),
        ));
    }
    groups.validate_cover()?;
    let alphas = config.resolve_alphas(groups)?;
    let lambdas: Vec<f64> = alphas.iter().map(|a| a * config.lambda).collect();

    let (n, m) = x.shape();
    let xs = x.as_nalgebra();
    let indicator = mask.indicator();
    let objective = |w: &DMatrix<f64>| half_masked_sq(xs, mask, w) + group_penalty(groups, &lambdas, w);

    let mut w_prev = match &config.warm_start {
        Some(w0) => {
            w0.ensure_shape(n, m, "warm start")?;
            w0.ensure_finite("warm start")?;
            w0.as_nalgebra().clone()
        }
        None => DMatrix::zeros(n, m),
    };
    let mut y = w_prev.clone();
    let mut eta = 1.0f64;
    let tau = config.lambda * config.gamma;
    let plan = ProxPlan::new(groups, config.trunc_rank, config.seed);

    let mut trace = vec![objective(&w_prev)];
    let mut stopping = Stopping::new(config.rel_tol, config.stop_window);
    let mut iters = 0;
    let mut converged = false;

    for k in 1..=config.max_iters {
        // Z = Y - γ P_Ω(Y - X)
        let grad = (&y - xs).component_mul(&indicator);
        let z = &y - grad * config.gamma;

        let mut w = plan.step(&z, tau, &alphas, k)?;
        if let Some(a) = config.spikiness_alpha {
            clip_in_place(&mut w, a);
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(GameError::Divergence { iteration: k });
        }
        let f = objective(&w);
        trace.push(f);
        iters = k;

        if config.accelerate {
            let increasing = trace.len() >= 3 && {
                let t = trace.len();
                trace[t - 1] > trace[t - 2] && trace[t - 2] > trace[t - 3]
            };
            if config.restart && increasing {
                eta = 1.0;
                y = w.clone();
            } else {
                let eta_next = (1.0 + (1.0 + 4.0 * eta * eta).sqrt()) / 2.0;
                y = &w + (&w - &w_prev) * ((eta - 1.0) / eta_next);
                eta = eta_next;
            }
        } else {
            y = w.clone();
        }

        observer(k, &DenseMatrix::wrap(w.clone()));
        w_prev = w;
        if stopping.update(&trace) {
            converged = true;
            break;
        }
    }

    let per_category_svd = if config.keep_factors {
        let mut factors = Vec::with_capacity(groups.len());
        for (k, c) in groups.categories().iter().enumerate() {
            factors.push(CategoryFactors {
                id: c.id.clone(),
                svd: svd_of(&groups.extract_at(k, &w_prev))?,
            });
        }
        Some(factors)
    } else {
        None
    };

    Ok(CompletionResult {
        w_hat: DenseMatrix::wrap(w_prev),
        objective_trace: trace,
        iters_run: iters,
        converged,
        per_category_svd,
    })
}
