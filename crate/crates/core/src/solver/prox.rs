//! Category proximal maps and the proximal-average step.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::config::{check_alphas, check_gamma, check_lambda};
use crate::error::{GameError, Result};
use crate::groups::GroupStructure;
use crate::linalg::{shrink, soft_threshold_of, truncated_of, DenseMatrix};
use crate::rng;

/// Proximal map of `tau ||D_c W||_*`:
/// `Z - D_cᵀ(D_c Z - svt(D_c Z, tau))`.
///
/// Rows outside category `id` pass through untouched; rows inside are replaced
/// by the soft-thresholded block.
pub fn prox_group(
    groups: &GroupStructure,
    id: &str,
    z: &DenseMatrix,
    tau: f64,
) -> Result<DenseMatrix> {
    let k = groups.index_of(id)?;
    check_tau(tau)?;
    check_input(groups, z)?;
    let block = soft_threshold_of(&groups.extract_at(k, z.as_nalgebra()), tau)?;
    let mut out = z.as_nalgebra().clone();
    for (local, &row) in groups.categories()[k].rows.iter().enumerate() {
        out.row_mut(row).copy_from(&block.row(local));
    }
    Ok(DenseMatrix::wrap(out))
}

/// One proximal-average step: `Σ_c α_c prox_group(c, Z, λγ)`.
pub fn prox_average_step(
    groups: &GroupStructure,
    z: &DenseMatrix,
    gamma: f64,
    lambda: f64,
    alphas: &[f64],
) -> Result<DenseMatrix> {
    check_gamma(gamma)?;
    check_lambda(lambda)?;
    check_alphas(alphas, groups.len())?;
    check_input(groups, z)?;
    let plan = ProxPlan::new(groups, None, 0);
    plan.step(z.as_nalgebra(), lambda * gamma, alphas, 0)
        .map(DenseMatrix::wrap)
}

/// Step size `min{1, 2ε / L̄²}` with `L̄² = Σ_c α_c λ² min(n_c, m)`.
///
/// Each category penalty `λ ||D_c W||_*` is Lipschitz with constant
/// `λ sqrt(min(n_c, m))` because `||D_c||_op = 1`.
pub fn step_size_from_accuracy(
    groups: &GroupStructure,
    lambda: f64,
    alphas: &[f64],
    m: usize,
    epsilon: f64,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(GameError::validation(format!(
            "accuracy must be positive, got {epsilon}"
        )));
    }
    check_lambda(lambda)?;
    check_alphas(alphas, groups.len())?;
    let l_bar_sq: f64 = groups
        .categories()
        .iter()
        .zip(alphas)
        .map(|(c, a)| a * lambda * lambda * c.len().min(m) as f64)
        .sum();
    if l_bar_sq == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * epsilon / l_bar_sq).min(1.0))
}

/// Clamps every entry to `[-α*/sqrt(nm), α*/sqrt(nm)]`.
pub fn clip_spikiness(w: &DenseMatrix, alpha_star: f64) -> DenseMatrix {
    let mut out = w.as_nalgebra().clone();
    clip_in_place(&mut out, alpha_star);
    DenseMatrix::wrap(out)
}

pub(crate) fn spikiness_bound(n: usize, m: usize, alpha_star: f64) -> f64 {
    alpha_star / ((n * m) as f64).sqrt()
}

pub(crate) fn clip_in_place(w: &mut DMatrix<f64>, alpha_star: f64) {
    let bound = spikiness_bound(w.nrows(), w.ncols(), alpha_star);
    w.apply(|v| *v = v.clamp(-bound, bound));
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(GameError::validation(format!(
            "threshold must be finite and nonnegative, got {tau}"
        )));
    }
    Ok(())
}

fn check_input(groups: &GroupStructure, z: &DenseMatrix) -> Result<()> {
    if z.rows() != groups.n() {
        return Err(GameError::shape(
            format!("matrix with {} rows", groups.n()),
            format!("{} rows", z.rows()),
        ));
    }
    z.ensure_finite("prox input")
}

/// Precomputed row membership for repeated proximal-average steps.
pub(crate) struct ProxPlan<'a> {
    groups: &'a GroupStructure,
    /// `local[k][i]` is the position of row `i` inside category `k`, if any.
    local: Vec<Vec<Option<usize>>>,
    trunc_rank: Option<usize>,
    seed: u64,
}

impl<'a> ProxPlan<'a> {
    pub(crate) fn new(groups: &'a GroupStructure, trunc_rank: Option<usize>, seed: u64) -> Self {
        let local = groups
            .categories()
            .iter()
            .map(|c| {
                let mut pos = vec![None; groups.n()];
                for (l, &r) in c.rows.iter().enumerate() {
                    pos[r] = Some(l);
                }
                pos
            })
            .collect();
        ProxPlan {
            groups,
            local,
            trunc_rank,
            seed,
        }
    }

    fn block_prox(&self, k: usize, z: &DMatrix<f64>, tau: f64, iteration: usize) -> Result<DMatrix<f64>> {
        let block = self.groups.extract_at(k, z);
        if tau == 0.0 {
            return Ok(block);
        }
        let full_rank = block.nrows().min(block.ncols());
        match self.trunc_rank {
            Some(r) if full_rank > 2 * r => {
                let seed = rng::derive_seed(self.seed, (iteration as u64) << 20 | k as u64);
                let svd = truncated_of(&block, r, crate::linalg::DEFAULT_OVERSAMPLE, crate::linalg::DEFAULT_POWER_ITERS, seed)?;
                Ok(shrink(&svd, tau, block.nrows(), block.ncols()))
            }
            _ => soft_threshold_of(&block, tau),
        }
    }

    /// `Σ_c α_c [(I - D_cᵀD_c) Z + D_cᵀ svt(D_c Z, tau)]`.
    ///
    /// Category blocks are computed in parallel and summed in category order,
    /// so the result does not depend on the thread count.
    pub(crate) fn step(
        &self,
        z: &DMatrix<f64>,
        tau: f64,
        alphas: &[f64],
        iteration: usize,
    ) -> Result<DMatrix<f64>> {
        let blocks: Vec<Option<DMatrix<f64>>> = (0..self.groups.len())
            .into_par_iter()
            .map(|k| {
                if alphas[k] == 0.0 {
                    Ok(None)
                } else {
                    self.block_prox(k, z, tau, iteration).map(Some)
                }
            })
            .collect::<Result<_>>()?;

        let (n, m) = z.shape();
        let mut w = DMatrix::zeros(n, m);
        for (k, block) in blocks.iter().enumerate() {
            let Some(block) = block else { continue };
            let alpha = alphas[k];
            let local = &self.local[k];
            for j in 0..m {
                for i in 0..n {
                    let v = match local[i] {
                        Some(l) => block[(l, j)],
                        None => z[(i, j)],
                    };
                    w[(i, j)] += alpha * v;
                }
            }
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::Category;
    use crate::linalg::{nuclear_norm, soft_threshold_svd};
    use proptest::prelude::*;

    fn random(n: usize, m: usize, seed: u64) -> DenseMatrix {
        DenseMatrix::random_normal(n, m, &mut rng::seeded(seed))
    }

    fn three_overlapping(n: usize) -> GroupStructure {
        GroupStructure::new(
            n,
            vec![
                Category::new("lo", 0..n * 2 / 3),
                Category::new("hi", n / 3..n),
                Category::new("all", 0..n),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_threshold_is_identity() {
        let g = three_overlapping(6);
        let z = random(6, 4, 1);
        assert_eq!(prox_group(&g, "lo", &z, 0.0).unwrap(), z);
    }

    #[test]
    fn all_rows_category_reduces_to_svt() {
        let g = three_overlapping(6);
        let z = random(6, 4, 2);
        let a = prox_group(&g, "all", &z, 0.4).unwrap();
        let b = soft_threshold_svd(&z, 0.4).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn singleton_category_scales_row() {
        let g = GroupStructure::new(6, vec![Category::new("all", 0..6), Category::new("one", [2])]).unwrap();
        let z = random(6, 4, 3);
        let tau = 0.3;
        let out = prox_group(&g, "one", &z, tau).unwrap();
        let row = z.row(2);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let factor = (1.0 - tau / norm).max(0.0);
        for (o, r) in out.row(2).iter().zip(&row) {
            assert!((o - factor * r).abs() < 1e-12);
        }
        for i in [0, 1, 3, 4, 5] {
            assert_eq!(out.row(i), z.row(i));
        }
    }

    #[test]
    fn unknown_category() {
        let g = three_overlapping(6);
        assert!(matches!(
            prox_group(&g, "missing", &random(6, 4, 1), 0.1),
            Err(GameError::UnknownCategory(_))
        ));
    }

    #[test]
    fn prox_is_local_minimizer() {
        let g = three_overlapping(6);
        let z = random(6, 4, 4);
        let tau = 0.6;
        let o = prox_group(&g, "hi", &z, tau).unwrap();
        let obj = |w: &DenseMatrix| {
            0.5 * z.sub(w).frobenius_norm().powi(2)
                + tau * nuclear_norm(&g.extract_rows("hi", w).unwrap()).unwrap()
        };
        let base = obj(&o);
        let mut r = rng::seeded(5);
        for _ in 0..1000 {
            let d = DenseMatrix::random_normal(6, 4, &mut r);
            let d = d.scale(1e-3 / d.frobenius_norm());
            assert!(base <= obj(&o.add(&d)) + 1e-12);
        }
    }

    #[test]
    fn average_step_single_category() {
        let g = GroupStructure::single(5, "all").unwrap();
        let z = random(5, 3, 6);
        let step = prox_average_step(&g, &z, 0.5, 0.8, &[1.0]).unwrap();
        assert!(step.max_abs_diff(&prox_group(&g, "all", &z, 0.4).unwrap()) == 0.0);
    }

    #[test]
    fn average_step_without_penalty() {
        let g = three_overlapping(6);
        let z = random(6, 4, 7);
        let step = prox_average_step(&g, &z, 1.0, 0.0, &[0.2, 0.3, 0.5]).unwrap();
        assert!(step.max_abs_diff(&z) < 1e-15);
    }

    #[test]
    fn average_step_two_disjoint_groups() {
        let g = GroupStructure::new(4, vec![Category::new("g1", 0..2), Category::new("g2", 2..4)]).unwrap();
        let z = random(4, 3, 8);
        let (gamma, lambda) = (0.5, 0.6);
        let step = prox_average_step(&g, &z, gamma, lambda, &[0.5, 0.5]).unwrap();
        // hand expansion: rows of g1 are ½ svt(Z_1, λγ) + ½ Z_1
        let z1 = g.extract_rows("g1", &z).unwrap();
        let expect = soft_threshold_svd(&z1, lambda * gamma).unwrap().scale(0.5).add(&z1.scale(0.5));
        assert!(g.extract_rows("g1", &step).unwrap().max_abs_diff(&expect) < 1e-12);
        let z2 = g.extract_rows("g2", &z).unwrap();
        let expect2 = soft_threshold_svd(&z2, lambda * gamma).unwrap().scale(0.5).add(&z2.scale(0.5));
        assert!(g.extract_rows("g2", &step).unwrap().max_abs_diff(&expect2) < 1e-12);
    }

    #[test]
    fn average_step_rejects_bad_weights() {
        let g = three_overlapping(6);
        let z = random(6, 4, 1);
        assert!(prox_average_step(&g, &z, 1.0, 1.0, &[0.5, 0.5, 0.5]).is_err());
        assert!(prox_average_step(&g, &z, 1.0, 1.0, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn step_size_rule() {
        let g = GroupStructure::new(100, vec![Category::new("a", 0..50), Category::new("b", 50..100)]).unwrap();
        let a = [0.5, 0.5];
        let gamma = step_size_from_accuracy(&g, 1.0, &a, 20, 1.0).unwrap();
        assert!((gamma - 0.1).abs() < 1e-15);
        assert_eq!(step_size_from_accuracy(&g, 1.0, &a, 20, 1e9).unwrap(), 1.0);
        let g1 = step_size_from_accuracy(&g, 1.0, &a, 20, 0.01).unwrap();
        let g2 = step_size_from_accuracy(&g, 1.0, &a, 20, 0.005).unwrap();
        assert!((g1 - 2.0 * g2).abs() < 1e-15);
        assert!(step_size_from_accuracy(&g, 1.0, &a, 20, 0.0).is_err());
        assert_eq!(step_size_from_accuracy(&g, 0.0, &a, 20, 1e-6).unwrap(), 1.0);
    }

    #[test]
    fn spikiness_clip() {
        let w = random(4, 4, 2).scale(0.01);
        // bound = 4/sqrt(16) = 1
        assert_eq!(clip_spikiness(&w, 4.0), w);
        let big = DenseMatrix::from_fn(4, 4, |_, _| 10.0);
        let clipped = clip_spikiness(&big, 4.0);
        assert!(clipped.to_row_major().iter().all(|&v| v == 1.0));
        let spiky = random(4, 4, 3).scale(5.0);
        let once = clip_spikiness(&spiky, 2.0);
        assert_eq!(clip_spikiness(&once, 2.0), once);
    }

    #[test]
    fn truncated_plan_matches_exact_on_low_rank_blocks() {
        let mut r = rng::seeded(9);
        let left = DenseMatrix::random_normal(30, 2, &mut r);
        let right = DenseMatrix::random_normal(2, 20, &mut r);
        let z = left.matmul(&right).unwrap();
        let g = GroupStructure::new(30, vec![Category::new("a", 0..18), Category::new("b", 12..30)]).unwrap();
        let exact = ProxPlan::new(&g, None, 0).step(z.as_nalgebra(), 0.5, &[0.4, 0.6], 0).unwrap();
        let approx = ProxPlan::new(&g, Some(3), 0).step(z.as_nalgebra(), 0.5, &[0.4, 0.6], 0).unwrap();
        assert!((exact - approx).amax() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn average_step_is_nonexpansive(seed in any::<u64>(), tau in 0.0f64..3.0) {
            let g = three_overlapping(6);
            let z1 = random(6, 4, seed);
            let z2 = random(6, 4, seed.wrapping_add(1));
            let a = [0.3, 0.3, 0.4];
            let s1 = prox_average_step(&g, &z1, 1.0, tau, &a).unwrap();
            let s2 = prox_average_step(&g, &z2, 1.0, tau, &a).unwrap();
            prop_assert!(s1.sub(&s2).frobenius_norm() <= z1.sub(&z2).frobenius_norm() + 1e-10);
        }

        #[test]
        fn svt_is_nonexpansive(seed in any::<u64>(), tau in 0.0f64..4.0) {
            let a = random(5, 4, seed);
            let b = random(5, 4, seed.wrapping_mul(3).wrapping_add(7));
            let sa = soft_threshold_svd(&a, tau).unwrap();
            let sb = soft_threshold_svd(&b, tau).unwrap();
            prop_assert!(sa.sub(&sb).frobenius_norm() <= a.sub(&b).frobenius_norm() + 1e-10);
        }
    }
}
