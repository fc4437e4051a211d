use game_core::eval::generate_planted_groups;
use game_core::prelude::*;

fn rank_one(n: usize, m: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, m, |i, j| ((i % 7) as f64 - 3.0) * (1.0 + (j as f64 * 0.37).sin()))
}

#[test]
fn one_category_reduces_to_global_svt() {
    let x = rank_one(30, 12);
    let mask = sample_uniform_mask(30, 12, 0.6, 4).unwrap();
    let groups = GroupStructure::single(30, "all").unwrap();
    let game = solve_game(&x, &mask, &groups, &SolverConfig::with_lambda(0.7)).unwrap();
    let svt = solve_global_svt(&x, &mask, &SvtConfig::with_lambda(0.7)).unwrap();
    assert!(game.w_hat.max_abs_diff(&svt.w_hat) < 1e-10);
    assert_eq!(game.iters_run, svt.iters_run);
}

#[test]
fn zero_penalty_on_full_mask_copies_input() {
    let x = rank_one(10, 6).map(|v| v + 0.25);
    let groups = GroupStructure::new(10, vec![Category::new("a", 0..6), Category::new("b", 4..10)]).unwrap();
    let cfg = SolverConfig { max_iters: 2, ..SolverConfig::with_lambda(0.0) };
    let fit = solve_game(&x, &ObservationMask::full(10, 6), &groups, &cfg).unwrap();
    assert!(fit.w_hat.max_abs_diff(&x) < 1e-12);
}

#[test]
fn recovers_planted_low_rank_groups() {
    let data = generate_planted_groups(&[60, 60], 30, 1, 0.0, 9).unwrap();
    let mask = sample_uniform_mask(120, 30, 0.6, 10).unwrap();
    let cfg = SolverConfig { max_iters: 3000, rel_tol: 1e-10, ..SolverConfig::with_lambda(1e-3) };
    let fit = solve_game(&data.x, &mask, &data.groups, &cfg).unwrap();
    let rel = fit.w_hat.sub(&data.w_star).frobenius_norm() / data.w_star.frobenius_norm();
    assert!(rel < 0.05, "relative error {rel}");
}

#[test]
fn spikiness_bound_holds_entrywise() {
    let x = rank_one(20, 10).scale(10.0);
    let mask = sample_uniform_mask(20, 10, 0.5, 2).unwrap();
    let groups = GroupStructure::single(20, "all").unwrap();
    let alpha = 50.0;
    let cfg = SolverConfig { spikiness_alpha: Some(alpha), ..SolverConfig::with_lambda(0.1) };
    let fit = solve_game(&x, &mask, &groups, &cfg).unwrap();
    assert!(fit.w_hat.max_abs() <= alpha / (200f64).sqrt() + 1e-12);
}

#[test]
fn plain_proximal_gradient_never_increases_objective() {
    let x = rank_one(24, 10);
    let mask = sample_uniform_mask(24, 10, 0.5, 5).unwrap();
    let groups = GroupStructure::new(24, vec![Category::new("a", 0..16), Category::new("b", 8..24)]).unwrap();
    let cfg = SolverConfig { accelerate: false, max_iters: 300, ..SolverConfig::with_lambda(0.5) };
    let fit = solve_game(&x, &mask, &groups, &cfg).unwrap();
    assert_eq!(fit.objective_trace.len(), fit.iters_run + 1);
    for pair in fit.objective_trace.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-9 * pair[0].abs(), "{pair:?}");
    }
}

#[test]
fn beats_mean_imputation_on_held_out_cells() {
    let data = generate_planted_groups(&[80, 80], 40, 2, 0.1, 21).unwrap();
    let full = ObservationMask::full(160, 40);
    let (train, test) = split_holdout(&full, 0.5, 22).unwrap();
    let fit = solve_game(&data.x, &train, &data.groups, &SolverConfig::with_lambda(1.0)).unwrap();

    let mut sums = vec![(0.0, 0usize); 40];
    for &(i, j) in train.cells() {
        sums[j].0 += data.x.get(i, j);
        sums[j].1 += 1;
    }
    let means = DenseMatrix::from_fn(160, 40, |_, j| sums[j].0 / sums[j].1.max(1) as f64);
    let game = rmse_on(&test, &data.x, &fit.w_hat).unwrap();
    let baseline = rmse_on(&test, &data.x, &means).unwrap();
    assert!(game < baseline, "game {game}, column means {baseline}");
}
