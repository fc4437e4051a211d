use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{GameError, Result};
use crate::groups::GroupStructure;
use crate::linalg::{nuclear_norm_of, DenseMatrix};
use crate::observation::{project_observed, ObservationMask};

/// `½ ||P_Ω(X - W)||_F²`.
pub fn loss(x: &DenseMatrix, mask: &ObservationMask, w: &DenseMatrix) -> Result<f64> {
    mask.ensure_matches(x, "data matrix")?;
    mask.ensure_matches(w, "estimate")?;
    Ok(half_masked_sq(x.as_nalgebra(), mask, w.as_nalgebra()))
}

/// `∇ loss(W) = P_Ω(W - X)`.
pub fn loss_gradient(
    x: &DenseMatrix,
    mask: &ObservationMask,
    w: &DenseMatrix,
) -> Result<DenseMatrix> {
    mask.ensure_matches(w, "estimate")?;
    project_observed(mask, &w.sub(x))
}

pub(crate) fn half_masked_sq(x: &DMatrix<f64>, mask: &ObservationMask, w: &DMatrix<f64>) -> f64 {
    0.5 * mask
        .cells()
        .iter()
        .map(|&(i, j)| {
            let r = x[(i, j)] - w[(i, j)];
            r * r
        })
        .sum::<f64>()
}

pub(crate) fn group_penalty(groups: &GroupStructure, lambdas: &[f64], w: &DMatrix<f64>) -> f64 {
    let norms: Vec<f64> = (0..groups.len())
        .into_par_iter()
        .map(|k| {
            if lambdas[k] == 0.0 {
                0.0
            } else {
                lambdas[k] * nuclear_norm_of(&groups.extract_at(k, w))
            }
        })
        .collect();
    norms.iter().sum()
}

/// `½ ||P_Ω(X - W)||_F² + Σ_c λ_c ||W_c||_*` with per-category levels `lambdas`.
pub fn objective(
    x: &DenseMatrix,
    mask: &ObservationMask,
    groups: &GroupStructure,
    lambdas: &[f64],
    w: &DenseMatrix,
) -> Result<f64> {
    mask.ensure_matches(x, "data matrix")?;
    mask.ensure_matches(w, "estimate")?;
    if groups.n() != x.rows() {
        return Err(GameError::shape(
            format!("group structure over {} rows", x.rows()),
            format!("{}", groups.n()),
        ));
    }
    if lambdas.len() != groups.len() {
        return Err(GameError::shape(
            format!("{} penalty levels", groups.len()),
            format!("{}", lambdas.len()),
        ));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(GameError::validation("penalty levels must be nonnegative"));
    }
    w.ensure_finite("estimate")?;
    Ok(half_masked_sq(x.as_nalgebra(), mask, w.as_nalgebra())
        + group_penalty(groups, lambdas, w.as_nalgebra()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::Category;
    use crate::linalg::nuclear_norm;
    use crate::observation::sample_uniform_mask;
    use crate::rng;

    fn random(n: usize, m: usize, seed: u64) -> DenseMatrix {
        DenseMatrix::random_normal(n, m, &mut rng::seeded(seed))
    }

    #[test]
    fn exact_fit_without_penalty_is_zero() {
        let x = random(5, 4, 1);
        let g = GroupStructure::single(5, "all").unwrap();
        let f = objective(&x, &ObservationMask::full(5, 4), &g, &[0.0], &x).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn zero_estimate_is_half_observed_energy() {
        let x = random(6, 5, 2);
        let mask = sample_uniform_mask(6, 5, 0.5, 3).unwrap();
        let g = GroupStructure::new(6, vec![Category::new("a", 0..4), Category::new("b", 2..6)]).unwrap();
        let f = objective(&x, &mask, &g, &[0.7, 1.3], &DenseMatrix::zeros(6, 5)).unwrap();
        let expected = 0.5 * project_observed(&mask, &x).unwrap().frobenius_norm().powi(2);
        assert!((f - expected).abs() < 1e-12);
    }

    #[test]
    fn single_category_matches_global_objective() {
        let x = random(7, 5, 4);
        let w = random(7, 5, 5);
        let mask = sample_uniform_mask(7, 5, 0.6, 6).unwrap();
        let g = GroupStructure::single(7, "all").unwrap();
        let lambda = 0.8;
        let f = objective(&x, &mask, &g, &[lambda], &w).unwrap();
        // independent route: dense residual then projection, plus global nuclear norm
        let resid = project_observed(&mask, &x.sub(&w)).unwrap();
        let global = 0.5 * resid.frobenius_norm().powi(2) + lambda * nuclear_norm(&w).unwrap();
        assert!((f - global).abs() < 1e-10);
    }

    #[test]
    fn shape_errors() {
        let x = random(4, 3, 1);
        let g = GroupStructure::single(4, "all").unwrap();
        let mask = ObservationMask::full(4, 3);
        assert!(objective(&x, &mask, &g, &[1.0, 1.0], &x).is_err());
        assert!(objective(&x, &mask, &g, &[1.0], &random(4, 2, 1)).is_err());
        assert!(objective(&x, &ObservationMask::full(3, 3), &g, &[1.0], &x).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (n, m) = (6, 5);
        let x = random(n, m, 7);
        let w = random(n, m, 8);
        let mask = sample_uniform_mask(n, m, 0.5, 9).unwrap();
        let grad = loss_gradient(&x, &mask, &w).unwrap();
        let h = 1e-6;
        for i in 0..n {
            for j in 0..m {
                let bump = |s: f64| {
                    let mut e = w.clone().into_nalgebra();
                    e[(i, j)] += s * h;
                    loss(&x, &mask, &DenseMatrix::from_nalgebra(e).unwrap()).unwrap()
                };
                let fd = (bump(1.0) - bump(-1.0)) / (2.0 * h);
                let g = grad.get(i, j);
                assert!((fd - g).abs() <= 1e-5 * g.abs().max(1.0), "({i},{j}) {fd} vs {g}");
            }
        }
    }
}
