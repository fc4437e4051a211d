//! Synthetic data with planted group structure.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::cluster::LabelVector;
use crate::error::{GameError, Result};
use crate::groups::{Category, GroupStructure};
use crate::linalg::DenseMatrix;
use crate::rng::{self, GameRng};

/// How the per-row latent scores `u_i`, `z_i` are normalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreNormalization {
    /// Each score vector is scaled to unit l2 norm.
    #[default]
    UnitNorm,
    /// Each latent coordinate is centered and scaled to unit variance across rows.
    Standardized,
}

/// Parameters of the crossed group / subcluster generator.
///
/// Row `i` in observed group `g` and hidden subcluster `s` is
/// `μ_g + ν_s + u_i V_gᵀ + (1 - β) z_i W_sᵀ + noise`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub num_groups: usize,
    pub num_subclusters: usize,
    pub group_rank: usize,
    pub subcluster_rank: usize,
    pub beta: f64,
    pub noise_sigma: f64,
    pub scores: ScoreNormalization,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 1000,
            m: 500,
            num_groups: 10,
            num_subclusters: 5,
            group_rank: 3,
            subcluster_rank: 3,
            beta: 0.0,
            noise_sigma: 0.1,
            scores: ScoreNormalization::UnitNorm,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(GameError::Validation(msg));
        if self.n == 0 || self.m == 0 {
            return fail(format!("dimensions must be positive, got {}x{}", self.n, self.m));
        }
        if self.num_groups == 0 || self.num_groups > self.n {
            return fail(format!("group count {} outside 1..={}", self.num_groups, self.n));
        }
        if self.num_subclusters == 0 || self.num_subclusters > self.n {
            return fail(format!(
                "subcluster count {} outside 1..={}",
                self.num_subclusters, self.n
            ));
        }
        for (name, r) in [("group", self.group_rank), ("subcluster", self.subcluster_rank)] {
            if r == 0 || r > self.m {
                return fail(format!("{name} rank {r} outside 1..={}", self.m));
            }
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return fail(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise sigma must be nonnegative, got {}", self.noise_sigma));
        }
        Ok(())
    }
}

/// The generative pieces behind a crossed-group sample.
#[derive(Clone, Debug)]
pub struct CrossedComponents {
    /// `num_groups x m`, row `g` is `μ_g`.
    pub group_means: DenseMatrix,
    /// `num_subclusters x m`, row `s` is `ν_s`.
    pub subcluster_means: DenseMatrix,
    /// `m x group_rank` orthonormal bases `V_g`.
    pub group_bases: Vec<DenseMatrix>,
    /// `m x subcluster_rank` orthonormal bases `W_s`.
    pub subcluster_bases: Vec<DenseMatrix>,
    /// Rows `u_i V_gᵀ`.
    pub group_component: DenseMatrix,
    /// Rows `(1 - β) z_i W_sᵀ`.
    pub subcluster_component: DenseMatrix,
    /// Noise-free matrix.
    pub signal: DenseMatrix,
}

#[derive(Clone, Debug)]
pub struct CrossedGroups {
    pub x: DenseMatrix,
    pub groups: GroupStructure,
    pub group_labels: LabelVector,
    pub hidden: LabelVector,
    pub components: CrossedComponents,
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut GameRng) -> DMatrix<f64> {
    DenseMatrix::random_normal(rows, cols, rng).into_nalgebra()
}

fn orthonormal_basis(m: usize, r: usize, rng: &mut GameRng) -> DMatrix<f64> {
    normal_matrix(m, r, rng).qr().q()
}

/// Balanced labels in `0..k`, randomly permuted.
fn balanced_labels(n: usize, k: usize, rng: &mut GameRng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(rng);
    labels
}

fn latent_scores(n: usize, r: usize, norm: ScoreNormalization, rng: &mut GameRng) -> DMatrix<f64> {
    let mut s = normal_matrix(n, r, rng);
    match norm {
        ScoreNormalization::UnitNorm => {
            for mut row in s.row_iter_mut() {
                let len = row.norm();
                if len > 0.0 {
                    row /= len;
                }
            }
        }
        ScoreNormalization::Standardized => {
            for mut col in s.column_iter_mut() {
                let mean = col.mean();
                col.add_scalar_mut(-mean);
                let sd = (col.norm_squared() / n as f64).sqrt();
                if sd > 0.0 {
                    col /= sd;
                }
            }
        }
    }
    s
}

/// Draws a crossed group / subcluster matrix.
///
/// Group and subcluster memberships are balanced and independent of each
/// other. Mean vectors have i.i.d. `N(0, 1/m)` entries.
pub fn generate_crossed_groups(spec: &SyntheticSpec) -> Result<CrossedGroups> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.m);
    let mut rng = rng::seeded(spec.seed);

    let group_of = balanced_labels(n, spec.num_groups, &mut rng);
    let sub_of = balanced_labels(n, spec.num_subclusters, &mut rng);
    let mean_scale = 1.0 / (m as f64).sqrt();
    let group_means = normal_matrix(spec.num_groups, m, &mut rng) * mean_scale;
    let sub_means = normal_matrix(spec.num_subclusters, m, &mut rng) * mean_scale;
    let group_bases: Vec<DMatrix<f64>> = (0..spec.num_groups)
        .map(|_| orthonormal_basis(m, spec.group_rank, &mut rng))
        .collect();
    let sub_bases: Vec<DMatrix<f64>> = (0..spec.num_subclusters)
        .map(|_| orthonormal_basis(m, spec.subcluster_rank, &mut rng))
        .collect();
    let u = latent_scores(n, spec.group_rank, spec.scores, &mut rng);
    let z = latent_scores(n, spec.subcluster_rank, spec.scores, &mut rng);

    let shrink = 1.0 - spec.beta;
    let mut group_part = DMatrix::zeros(n, m);
    let mut sub_part = DMatrix::zeros(n, m);
    let mut signal = DMatrix::zeros(n, m);
    for i in 0..n {
        let (g, s) = (group_of[i], sub_of[i]);
        let gp = u.row(i) * group_bases[g].transpose();
        let sp = (z.row(i) * sub_bases[s].transpose()) * shrink;
        group_part.row_mut(i).copy_from(&gp);
        sub_part.row_mut(i).copy_from(&sp);
        let row = group_means.row(g) + sub_means.row(s) + gp + sp;
        signal.row_mut(i).copy_from(&row);
    }
    let mut x = signal.clone();
    if spec.noise_sigma > 0.0 {
        for i in 0..n {
            for j in 0..m {
                let e: f64 = rng.sample(StandardNormal);
                x[(i, j)] += spec.noise_sigma * e;
            }
        }
    }

    let categories = (0..spec.num_groups)
        .map(|g| Category::new(format!("g{g}"), (0..n).filter(|&i| group_of[i] == g)))
        .collect();
    let groups = GroupStructure::new(n, categories)?;

    Ok(CrossedGroups {
        x: DenseMatrix::wrap(x),
        groups,
        group_labels: LabelVector::with_classes(group_of, spec.num_groups)?,
        hidden: LabelVector::with_classes(sub_of, spec.num_subclusters)?,
        components: CrossedComponents {
            group_means: DenseMatrix::wrap(group_means),
            subcluster_means: DenseMatrix::wrap(sub_means),
            group_bases: group_bases.into_iter().map(DenseMatrix::wrap).collect(),
            subcluster_bases: sub_bases.into_iter().map(DenseMatrix::wrap).collect(),
            group_component: DenseMatrix::wrap(group_part),
            subcluster_component: DenseMatrix::wrap(sub_part),
            signal: DenseMatrix::wrap(signal),
        },
    })
}

/// Disjoint row groups, each exactly low rank with its own right subspace.
#[derive(Clone, Debug)]
pub struct PlantedGroups {
    pub w_star: DenseMatrix,
    pub x: DenseMatrix,
    pub groups: GroupStructure,
    /// `m x rank` orthonormal right bases, one per group.
    pub bases: Vec<DenseMatrix>,
}

/// Group `g` occupies the next `sizes[g]` rows and equals `A_g B_gᵀ` with
/// `A_g` Gaussian and `B_g` a random orthonormal `m x rank` basis; `x` adds
/// `N(0, noise_sigma²)` noise.
pub fn generate_planted_groups(
    sizes: &[usize],
    m: usize,
    rank: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<PlantedGroups> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(GameError::validation("every planted group needs at least one row"));
    }
    if rank == 0 || rank > m {
        return Err(GameError::validation(format!("rank {rank} outside 1..={m}")));
    }
    if !(noise_sigma >= 0.0) {
        return Err(GameError::validation("noise sigma must be nonnegative"));
    }
    let n: usize = sizes.iter().sum();
    let mut rng = rng::seeded(seed);
    let mut w = DMatrix::zeros(n, m);
    let mut bases = Vec::with_capacity(sizes.len());
    let mut categories = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for (g, &size) in sizes.iter().enumerate() {
        let basis = orthonormal_basis(m, rank, &mut rng);
        let scores = normal_matrix(size, rank, &mut rng);
        let block = scores * basis.transpose();
        w.rows_mut(start, size).copy_from(&block);
        categories.push(Category::new(format!("g{g}"), start..start + size));
        bases.push(DenseMatrix::wrap(basis));
        start += size;
    }
    let mut x = w.clone();
    if noise_sigma > 0.0 {
        x += normal_matrix(n, m, &mut rng) * noise_sigma;
    }
    Ok(PlantedGroups {
        w_star: DenseMatrix::wrap(w),
        x: DenseMatrix::wrap(x),
        groups: GroupStructure::new(n, categories)?,
        bases,
    })
}
