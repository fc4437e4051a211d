use crate::error::{GameError, Result};
use crate::groups::{weights_from_lambdas, GroupStructure, WEIGHT_SUM_TOL};
use crate::linalg::{DenseMatrix, ThinSvd};

pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_REL_TOL: f64 = 1e-6;
/// Consecutive iterations that must all fall below `rel_tol` before stopping.
pub const DEFAULT_STOP_WINDOW: usize = 3;

/// Settings for the group-aware solver.
///
/// The penalty is `lambda * Σ_c α_c ||W_c||_*`; `alphas = None` takes the
/// weights stored on the [`GroupStructure`].
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub lambda: f64,
    pub alphas: Option<Vec<f64>>,
    /// Gradient step. The loss gradient is 1-Lipschitz, so any value in (0, 1] is stable.
    pub gamma: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub stop_window: usize,
    /// Rank of the randomized per-category SVD; `None` uses exact SVDs.
    pub trunc_rank: Option<usize>,
    /// Entrywise bound `α* / sqrt(nm)` applied after every step when set.
    pub spikiness_alpha: Option<f64>,
    /// PA-APG when true, PA-PG otherwise.
    pub accelerate: bool,
    /// Reset momentum after two consecutive objective increases.
    pub restart: bool,
    /// Compute a thin SVD of each `Ŵ_c` at the end of the solve.
    pub keep_factors: bool,
    pub warm_start: Option<DenseMatrix>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 1.0,
            alphas: None,
            gamma: 1.0,
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            stop_window: DEFAULT_STOP_WINDOW,
            trunc_rank: None,
            spikiness_alpha: None,
            accelerate: true,
            restart: true,
            keep_factors: false,
            warm_start: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            ..Default::default()
        }
    }

    /// Sets `lambda = Σ λ_c` and `α_c = λ_c / lambda`.
    pub fn with_category_lambdas(mut self, lambdas: &[f64]) -> Result<Self> {
        let (lambda, alphas) = weights_from_lambdas(lambdas)?;
        self.lambda = lambda;
        self.alphas = Some(alphas);
        Ok(self)
    }

    /// Effective weights for `groups`, validated.
    pub fn resolve_alphas(&self, groups: &GroupStructure) -> Result<Vec<f64>> {
        let alphas = self
            .alphas
            .clone()
            .unwrap_or_else(|| groups.weights().to_vec());
        check_alphas(&alphas, groups.len())?;
        Ok(alphas)
    }

    /// Per-category levels `λ_c = α_c λ` as they enter the objective.
    pub fn category_lambdas(&self, groups: &GroupStructure) -> Result<Vec<f64>> {
        Ok(self
            .resolve_alphas(groups)?
            .iter()
            .map(|a| a * self.lambda)
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        check_gamma(self.gamma)?;
        if !(self.rel_tol > 0.0) {
            return Err(GameError::validation(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.stop_window == 0 {
            return Err(GameError::validation("stop window must be at least 1"));
        }
        if self.trunc_rank == Some(0) {
            return Err(GameError::validation("truncation rank must be at least 1"));
        }
        if let Some(a) = self.spikiness_alpha {
            if !(a >= 1.0 && a.is_finite()) {
                return Err(GameError::validation(format!(
                    "spikiness bound must be at least 1, got {a}"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(GameError::validation(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(GameError::validation(format!(
            "step size must lie in (0, 1], got {gamma}"
        )));
    }
    Ok(())
}

pub(crate) fn check_alphas(alphas: &[f64], expected: usize) -> Result<()> {
    if alphas.len() != expected {
        return Err(GameError::shape(
            format!("{expected} category weights"),
            format!("{}", alphas.len()),
        ));
    }
    if alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(GameError::validation("category weights must be nonnegative"));
    }
    let sum: f64 = alphas.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(GameError::validation(format!(
            "category weights must sum to 1, got {sum}"
        )));
    }
    Ok(())
}

/// Thin SVD of one category block of the estimate.
#[derive(Clone, Debug)]
pub struct CategoryFactors {
    pub id: String,
    pub svd: ThinSvd,
}

#[derive(Clone, Debug)]
pub struct CompletionResult {
    pub w_hat: DenseMatrix,
    /// Objective at the starting point followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    pub iters_run: usize,
    pub converged: bool,
    pub per_category_svd: Option<Vec<CategoryFactors>>,
}

impl CompletionResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }

    pub fn factors(&self, id: &str) -> Option<&ThinSvd> {
        self.per_category_svd
            .as_ref()?
            .iter()
            .find(|f| f.id == id)
            .map(|f| &f.svd)
    }
}
