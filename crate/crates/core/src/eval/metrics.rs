use serde::Serialize;

use crate::error::{GameError, Result};
use crate::groups::GroupStructure;
use crate::linalg::{
    grassmann_distance_with, procrustes_subspace_error, svd_of, DenseMatrix, GrassmannMetric,
};
use crate::observation::ObservationMask;

/// Relative threshold for counting the rank of a reference block.
pub const SUBSPACE_RANK_REL_TOL: f64 = 1e-6;

/// Root mean squared error over the cells of `mask_test`.
pub fn rmse_on(mask_test: &ObservationMask, x: &DenseMatrix, w_hat: &DenseMatrix) -> Result<f64> {
    mask_test.ensure_matches(x, "reference matrix")?;
    mask_test.ensure_matches(w_hat, "estimate")?;
    if mask_test.is_empty() {
        return Err(GameError::validation("test mask is empty"));
    }
    let sum: f64 = mask_test
        .cells()
        .iter()
        .map(|&(i, j)| (w_hat.get(i, j) - x.get(i, j)).powi(2))
        .sum();
    Ok((sum / mask_test.len() as f64).sqrt())
}

/// `||W_hat - W*||_F / ||W*||_F` (absolute error when `W*` is zero).
pub fn relative_frobenius_error(w_star: &DenseMatrix, w_hat: &DenseMatrix) -> Result<f64> {
    w_hat.ensure_shape(w_star.rows(), w_star.cols(), "estimate")?;
    let err = w_hat.sub(w_star).frobenius_norm();
    let scale = w_star.frobenius_norm();
    Ok(if scale > 0.0 { err / scale } else { err })
}

/// Fills unobserved cells with their column's observed mean (0 for empty columns).
pub fn column_mean_impute(x: &DenseMatrix, mask: &ObservationMask) -> Result<DenseMatrix> {
    mask.ensure_matches(x, "data matrix")?;
    let (n, m) = x.shape();
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for &(i, j) in mask.cells() {
        sums[j] += x.get(i, j);
        counts[j] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    Ok(DenseMatrix::from_fn(n, m, |i, j| {
        if mask.contains(i, j) {
            x.get(i, j)
        } else {
            means[j]
        }
    }))
}

fn check_pair(groups: &GroupStructure, w_star: &DenseMatrix, w_hat: &DenseMatrix) -> Result<()> {
    if w_star.rows() != groups.n() {
        return Err(GameError::shape(
            format!("matrix with {} rows", groups.n()),
            format!("{} rows", w_star.rows()),
        ));
    }
    w_hat.ensure_shape(w_star.rows(), w_star.cols(), "estimate")
}

fn check_ranks(groups: &GroupStructure, m: usize, ranks: &[usize]) -> Result<()> {
    if ranks.len() != groups.len() {
        return Err(GameError::shape(
            format!("{} ranks", groups.len()),
            format!("{}", ranks.len()),
        ));
    }
    for (c, &r) in groups.categories().iter().zip(ranks) {
        let cap = c.len().min(m);
        if r == 0 || r > cap {
            return Err(GameError::validation(format!(
                "rank {r} for category `{}` outside 1..={cap}",
                c.id
            )));
        }
    }
    Ok(())
}

/// Top-`r` right singular bases of `W*_c` and `Ŵ_c` for every category.
fn right_bases(
    groups: &GroupStructure,
    w_star: &DenseMatrix,
    w_hat: &DenseMatrix,
    ranks: &[usize],
) -> Result<Vec<(DenseMatrix, DenseMatrix)>> {
    check_pair(groups, w_star, w_hat)?;
    check_ranks(groups, w_star.cols(), ranks)?;
    groups
        .categories()
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let star = svd_of(&groups.extract_at(k, w_star.as_nalgebra()))?;
            let hat = svd_of(&groups.extract_at(k, w_hat.as_nalgebra()))?;
            Ok((hat.right_basis(ranks[k])?, star.right_basis(ranks[k])?))
        })
        .collect()
}

/// Per-category Procrustes distance between the top-`r_c` right singular
/// subspaces of the reference and the estimate.
pub fn per_group_subspace_error(
    groups: &GroupStructure,
    w_star: &DenseMatrix,
    w_hat: &DenseMatrix,
    ranks: &[usize],
) -> Result<Vec<f64>> {
    right_bases(groups, w_star, w_hat, ranks)?
        .iter()
        .map(|(hat, star)| procrustes_subspace_error(hat, star))
        .collect()
}

/// Per-category Grassmann distance between top-`r_c` right singular subspaces.
pub fn per_group_grassmann(
    groups: &GroupStructure,
    w_star: &DenseMatrix,
    w_hat: &DenseMatrix,
    ranks: &[usize],
    metric: GrassmannMetric,
) -> Result<Vec<f64>> {
    right_bases(groups, w_star, w_hat, ranks)?
        .iter()
        .map(|(hat, star)| grassmann_distance_with(hat, star, metric))
        .collect()
}

/// Numerical rank of each reference block (at least 1).
pub fn default_ranks(groups: &GroupStructure, w_star: &DenseMatrix) -> Result<Vec<usize>> {
    if w_star.rows() != groups.n() {
        return Err(GameError::shape(
            format!("matrix with {} rows", groups.n()),
            format!("{} rows", w_star.rows()),
        ));
    }
    (0..groups.len())
        .map(|k| {
            let svd = svd_of(&groups.extract_at(k, w_star.as_nalgebra()))?;
            Ok(svd.numerical_rank(SUBSPACE_RANK_REL_TOL).max(1))
        })
        .collect()
}

/// A named metric value: a scalar or a per-category map.
#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(untagged)]
pub enum MetricValue {
    Scalar(f64),
    PerCategory(serde_json::Map<String, serde_json::Value>),
}

impl MetricValue {
    pub fn per_category<'a>(ids: impl Iterator<Item = &'a str>, values: &[f64]) -> Self {
        let map = ids
            .zip(values)
            .map(|(id, v)| (id.to_string(), serde_json::json!(v)))
            .collect();
        MetricValue::PerCategory(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::Category;
    use crate::observation::{project_observed, sample_uniform_mask};
    use crate::rng;

    fn random(n: usize, m: usize, seed: u64) -> DenseMatrix {
        DenseMatrix::random_normal(n, m, &mut rng::seeded(seed))
    }

    #[test]
    fn rmse_basics() {
        let x = random(5, 4, 1);
        let mask = ObservationMask::full(5, 4);
        assert_eq!(rmse_on(&mask, &x, &x).unwrap(), 0.0);
        let shifted = x.map(|v| v + 0.25);
        assert!((rmse_on(&mask, &x, &shifted).unwrap() - 0.25).abs() < 1e-12);
        let w = random(5, 4, 2);
        let single = ObservationMask::new(5, 4, [(3, 1)]).unwrap();
        assert!((rmse_on(&single, &x, &w).unwrap() - (w.get(3, 1) - x.get(3, 1)).abs()).abs() < 1e-15);
        assert!(rmse_on(&ObservationMask::empty(5, 4), &x, &w).is_err());
    }

    #[test]
    fn rmse_two_routes_agree() {
        let x = random(8, 6, 3);
        let w = random(8, 6, 4);
        let mask = sample_uniform_mask(8, 6, 0.5, 5).unwrap();
        let direct = rmse_on(&mask, &x, &w).unwrap();
        let projected = project_observed(&mask, &x.sub(&w)).unwrap().frobenius_norm() / (mask.len() as f64).sqrt();
        assert!((direct - projected).abs() < 1e-12);
    }

    #[test]
    fn column_means() {
        let x = DenseMatrix::from_row_major(3, 2, vec![1., 10., 3., 20., 5., 30.]).unwrap();
        let mask = ObservationMask::new(3, 2, [(0, 0), (1, 0), (2, 1)]).unwrap();
        let f = column_mean_impute(&x, &mask).unwrap();
        assert_eq!(f.to_row_major(), vec![1., 30., 3., 30., 2., 30.]);
    }

    fn planted(seed: u64) -> (GroupStructure, DenseMatrix) {
        let mut r = rng::seeded(seed);
        let g = GroupStructure::new(20, vec![Category::new("a", 0..10), Category::new("b", 10..20)]).unwrap();
        let a = DenseMatrix::random_normal(10, 2, &mut r).matmul(&DenseMatrix::random_normal(2, 8, &mut r)).unwrap();
        let b = DenseMatrix::random_normal(10, 2, &mut r).matmul(&DenseMatrix::random_normal(2, 8, &mut r)).unwrap();
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.push(a.row(i));
        }
        for i in 0..10 {
            rows.push(b.row(i));
        }
        (g, DenseMatrix::from_rows(&rows).unwrap())
    }

    #[test]
    fn subspace_error_zero_for_exact_estimate() {
        let (g, w) = planted(1);
        let errs = per_group_subspace_error(&g, &w, &w, &[2, 2]).unwrap();
        assert!(errs.iter().all(|e| *e < 1e-7));
        assert_eq!(default_ranks(&g, &w).unwrap(), vec![2, 2]);
    }

    #[test]
    fn subspace_error_ignores_rotation_inside_right_subspace() {
        let (g, w) = planted(2);
        // W_c V R Vᵀ with R a rotation of the right subspace leaves span(V) fixed
        let block = g.extract_rows("a", &w).unwrap();
        let v = crate::linalg::svd_full(&block).unwrap().right_basis(2).unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = DenseMatrix::from_row_major(2, 2, vec![c, -s, s, c]).unwrap();
        let vr = v.matmul(&rot).unwrap();
        let rotated = block.matmul(&v).unwrap().matmul(&rot).unwrap().matmul(&vr.transpose()).unwrap();
        let mut w_hat = w.clone().into_nalgebra();
        for (local, row) in (0..10).enumerate() {
            for j in 0..8 {
                w_hat[(row, j)] = rotated.get(local, j);
            }
        }
        let w_hat = DenseMatrix::from_nalgebra(w_hat).unwrap();
        let errs = per_group_subspace_error(&g, &w, &w_hat, &[2, 2]).unwrap();
        assert!(errs[0] < 1e-7, "{errs:?}");
    }

    #[test]
    fn subspace_error_scales_linearly_with_perturbation() {
        let (g, w) = planted(3);
        let noise = random(20, 8, 99);
        let noise = noise.scale(w.frobenius_norm() / noise.frobenius_norm());
        let err_at = |eps: f64| per_group_subspace_error(&g, &w, &w.add(&noise.scale(eps)), &[2, 2]).unwrap();
        let small = err_at(1e-3);
        let large = err_at(1e-2);
        for k in 0..2 {
            let ratio = large[k] / small[k];
            assert!((ratio - 10.0).abs() < 1.0, "ratio {ratio}");
        }
    }

    #[test]
    fn subspace_error_is_bounded_and_validates_ranks() {
        let (g, w) = planted(4);
        let other = random(20, 8, 5);
        let errs = per_group_subspace_error(&g, &w, &other, &[2, 3]).unwrap();
        assert!(errs[0] <= (4f64).sqrt() + 1e-12);
        assert!(errs[1] <= (6f64).sqrt() + 1e-12);
        assert!(per_group_subspace_error(&g, &w, &other, &[9, 2]).is_err());
        assert!(per_group_subspace_error(&g, &w, &other, &[2]).is_err());
    }

    #[test]
    fn metric_values_serialize() {
        let v = MetricValue::per_category(["a", "b"].into_iter(), &[0.5, 1.0]);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"a":0.5,"b":1.0}"#);
        assert_eq!(serde_json::to_string(&MetricValue::Scalar(2.0)).unwrap(), "2.0");
    }
}
