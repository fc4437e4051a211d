//! Shared fixtures for the solver benchmarks.

use game_core::eval::generate_planted_groups;
use game_core::prelude::*;

/// Planted low-rank problem with two overlapping categories.
pub struct Fixture {
    pub x: DenseMatrix,
    pub mask: ObservationMask,
    pub groups: GroupStructure,
}

/// `n x m` planted matrix with half the cells observed. Categories are the
/// first and last two thirds of the rows.
pub fn fixture(n: usize, m: usize, seed: u64) -> Fixture {
    let half = n / 2;
    let planted = generate_planted_groups(&[half, n - half], m, 3, 0.1, seed).expect("fixture data");
    let mask = sample_uniform_mask(n, m, 0.5, seed + 1).expect("fixture mask");
    let third = n / 3;
    let groups = GroupStructure::new(
        n,
        vec![Category::new("lower", 0..n - third), Category::new("upper", third..n)],
    )
    .expect("fixture groups");
    Fixture { x: planted.x, mask, groups }
}
