//! k-means and clustering agreement scores.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::linalg::DenseMatrix;
use crate::rng;

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_KMEANS_ITERS: usize = 300;

/// Per-row class ids in `0..num_classes`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    /// Class count is one past the largest label.
    pub fn new(labels: Vec<usize>) -> Self {
        let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        LabelVector {
            labels,
            num_classes,
        }
    }

    pub fn with_classes(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if let Some(l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(GameError::validation(format!(
                "label {l} outside 0..{num_classes}"
            )));
        }
        Ok(LabelVector {
            labels,
            num_classes,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Within-cluster sum of squared distances to cluster means.
pub fn wcss(x: &DenseMatrix, labels: &LabelVector) -> Result<f64> {
    if labels.len() != x.rows() {
        return Err(GameError::shape(
            format!("{} labels", x.rows()),
            format!("{}", labels.len()),
        ));
    }
    let points = x.to_row_major();
    let m = x.cols();
    let centers = centroids(&points, m, labels.labels(), labels.num_classes());
    Ok(labels
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(&points[i * m..(i + 1) * m], &centers[l * m..(l + 1) * m]))
        .sum())
}

fn centroids(points: &[f64], m: usize, labels: &[usize], k: usize) -> Vec<f64> {
    let mut sums = vec![0.0; k * m];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for j in 0..m {
            sums[l * m + j] += points[i * m + j];
        }
    }
    for l in 0..k {
        if counts[l] > 0 {
            for j in 0..m {
                sums[l * m + j] /= counts[l] as f64;
            }
        }
    }
    sums
}

/// k-means++ seeding: first center uniform, the rest drawn with probability
/// proportional to squared distance from the nearest chosen center.
fn seed_centers<R: Rng>(points: &[f64], n: usize, m: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k * m);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(&points[first * m..(first + 1) * m]);
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(&points[i * m..(i + 1) * m], &centers[..m]))
        .collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = &points[pick * m..(pick + 1) * m];
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(&points[i * m..(i + 1) * m], c));
        }
        centers.extend_from_slice(c);
    }
    centers
}

fn lloyd(points: &[f64], n: usize, m: usize, k: usize, mut centers: Vec<f64>, max_iters: usize) -> (Vec<usize>, f64) {
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        for i in 0..n {
            let p = &points[i * m..(i + 1) * m];
            let mut best = (0, f64::INFINITY);
            for c in 0..k {
                let d = sq_dist(p, &centers[c * m..(c + 1) * m]);
                if d < best.1 {
                    best = (c, d);
                }
            }
            if labels[i] != best.0 {
                labels[i] = best.0;
                changed = true;
            }
        }
        // an empty cluster takes the point farthest from its current center
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a * m..(a + 1) * m], &centers[labels[a] * m..(labels[a] + 1) * m]);
                        let db = sq_dist(&points[b * m..(b + 1) * m], &centers[labels[b] * m..(labels[b] + 1) * m]);
                        da.total_cmp(&db)
                    });
                if let Some(i) = far {
                    counts[labels[i]] -= 1;
                    labels[i] = c;
                    counts[c] = 1;
                    changed = true;
                }
            }
        }
        centers = centroids(points, m, &labels, k);
        if !changed {
            break;
        }
    }
    let cost = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(&points[i * m..(i + 1) * m], &centers[l * m..(l + 1) * m]))
        .sum();
    (labels, cost)
}

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// within-cluster sum of squares wins.
pub fn kmeans(
    x: &DenseMatrix,
    k: usize,
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<LabelVector> {
    let (n, m) = x.shape();
    if k == 0 || k > n {
        return Err(GameError::validation(format!(
            "cluster count {k} outside 1..={n}"
        )));
    }
    x.ensure_finite("clustering input")?;
    let points = x.to_row_major();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r in 0..restarts.max(1) {
        let mut g = rng::seeded(rng::derive_seed(seed, r as u64));
        let centers = seed_centers(&points, n, m, k, &mut g);
        let (labels, cost) = lloyd(&points, n, m, k, centers, max_iters);
        if best.as_ref().map_or(true, |(_, c)| cost < *c) {
            best = Some((labels, cost));
        }
    }
    let (labels, _) = best.expect("at least one restart");
    LabelVector::with_classes(labels, k)
}

struct Contingency {
    n: usize,
    cells: Vec<Vec<usize>>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
}

fn contingency(a: &LabelVector, b: &LabelVector) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(GameError::shape(
            format!("{} labels", a.len()),
            format!("{}", b.len()),
        ));
    }
    if a.is_empty() {
        return Err(GameError::validation("labelings are empty"));
    }
    let (ka, kb) = (a.num_classes(), b.num_classes());
    let mut cells = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        cells[x][y] += 1;
    }
    let row_sums = cells.iter().map(|r| r.iter().sum()).collect();
    let col_sums = (0..kb).map(|j| cells.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency {
        n: a.len(),
        cells,
        row_sums,
        col_sums,
    })
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index from the pair-counting contingency table.
///
/// When the expected and maximum index coincide (both partitions trivial),
/// the labelings are identical and the score is 1.
pub fn adjusted_rand_index(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    let t = contingency(a, b)?;
    let index: f64 = t.cells.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_a: f64 = t.row_sums.iter().map(|&c| pairs(c)).sum();
    let sum_b: f64 = t.col_sums.iter().map(|&c| pairs(c)).sum();
    let total = pairs(t.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// `I(a; b) / sqrt(H(a) H(b))` with natural logarithms; 0 when either entropy vanishes.
pub fn normalized_mutual_information(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    let t = contingency(a, b)?;
    let n = t.n as f64;
    let entropy = |sums: &[usize]| -> f64 {
        sums.iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let (ha, hb) = (entropy(&t.row_sums), entropy(&t.col_sums));
    if ha * hb <= 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in t.cells.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (t.row_sums[i] as f64 * t.col_sums[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};
    use rand_distr::StandardNormal;

    fn lv(v: &[usize]) -> LabelVector {
        LabelVector::new(v.to_vec())
    }

    fn blobs(per: usize, seed: u64) -> (DenseMatrix, LabelVector) {
        let mut g = rng::seeded(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in [[-10.0, -10.0, 0.0], [10.0, 10.0, 0.0]].iter().enumerate() {
            for _ in 0..per {
                rows.push(center.iter().map(|&x| x + g.sample::<f64, _>(StandardNormal)).collect());
                labels.push(c);
            }
        }
        (DenseMatrix::from_rows(&rows).unwrap(), LabelVector::new(labels))
    }

    #[test]
    fn separable_blobs() {
        let (x, truth) = blobs(25, 1);
        let found = kmeans(&x, 2, DEFAULT_RESTARTS, DEFAULT_KMEANS_ITERS, 3).unwrap();
        assert_eq!(adjusted_rand_index(&found, &truth).unwrap(), 1.0);
        assert!(wcss(&x, &found).unwrap() <= wcss(&x, &truth).unwrap() + 1e-9);
    }

    #[test]
    fn single_cluster() {
        let (x, _) = blobs(5, 2);
        let found = kmeans(&x, 1, 3, 50, 0).unwrap();
        assert!(found.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn too_many_clusters() {
        let (x, _) = blobs(2, 2);
        assert!(kmeans(&x, 5, 1, 10, 0).is_err());
        assert!(kmeans(&x, 0, 1, 10, 0).is_err());
    }

    #[test]
    fn kmeans_is_deterministic_and_handles_duplicates() {
        let x = DenseMatrix::from_fn(12, 2, |i, j| ((i % 3) * (j + 1)) as f64);
        let a = kmeans(&x, 4, 5, 100, 9).unwrap();
        assert_eq!(a, kmeans(&x, 4, 5, 100, 9).unwrap());
        let mut used = vec![false; 4];
        for &l in a.labels() {
            used[l] = true;
        }
        assert!(used.iter().all(|&u| u));
    }

    #[test]
    fn ari_reference_values() {
        assert_eq!(adjusted_rand_index(&lv(&[0, 0, 1, 1, 2]), &lv(&[0, 0, 1, 1, 2])).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&lv(&[0, 0, 0, 0]), &lv(&[0, 1, 0, 1])).unwrap(), 0.0);
        assert!(adjusted_rand_index(&lv(&[0, 1]), &lv(&[0])).is_err());
    }

    /// Pair-level brute force: counts agreements over all unordered pairs.
    fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut total) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                total += 1.0;
                if sa && sb {
                    both += 1.0;
                }
                if sa {
                    only_a += 1.0;
                }
                if sb {
                    only_b += 1.0;
                }
            }
        }
        let expected = only_a * only_b / total;
        (both - expected) / (0.5 * (only_a + only_b) - expected)
    }

    #[test]
    fn ari_four_points() {
        let (a, b) = ([0, 0, 1, 1], [0, 1, 0, 1]);
        let brute = ari_by_pairs(&a, &b);
        // pairs: same-a = 2, same-b = 2, both = 0, total 6 → (0 - 4/6) / (2 - 4/6) = -0.5
        assert!((brute + 0.5).abs() < 1e-15);
        assert!((adjusted_rand_index(&lv(&a), &lv(&b)).unwrap() - brute).abs() < 1e-15);
    }

    #[test]
    fn nmi_reference_values() {
        assert!((normalized_mutual_information(&lv(&[0, 0, 1, 1, 2]), &lv(&[2, 2, 0, 0, 1])).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(normalized_mutual_information(&lv(&[0, 0, 0]), &lv(&[0, 1, 2])).unwrap(), 0.0);
        assert!(normalized_mutual_information(&lv(&[0]), &lv(&[0, 1])).is_err());
    }

    #[test]
    fn nmi_of_independent_labelings_is_small() {
        let mut g = rng::seeded(4);
        let a: Vec<usize> = (0..10_000).map(|_| g.random_range(0..5)).collect();
        let b: Vec<usize> = (0..10_000).map(|_| g.random_range(0..5)).collect();
        assert!(normalized_mutual_information(&lv(&a), &lv(&b)).unwrap() < 0.05);
    }

    proptest! {
        #[test]
        fn scores_ignore_label_permutation(
            a in proptest::collection::vec(0usize..4, 2..40),
            seed in any::<u64>(),
        ) {
            let mut g = rng::seeded(seed);
            let b: Vec<usize> = a.iter().map(|_| g.random_range(0..3)).collect();
            let perm = [2usize, 0, 3, 1];
            let a_perm: Vec<usize> = a.iter().map(|&l| perm[l]).collect();
            let b_perm: Vec<usize> = b.iter().map(|&l| (l + 1) % 3).collect();
            let (la, lb, lap, lbp) = (lv(&a), lv(&b), lv(&a_perm), lv(&b_perm));
            let ari = adjusted_rand_index(&la, &lb).unwrap();
            prop_assert!((ari - adjusted_rand_index(&lap, &lbp).unwrap()).abs() < 1e-12);
            let nmi = normalized_mutual_information(&la, &lb).unwrap();
            prop_assert!((nmi - normalized_mutual_information(&lap, &lbp).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ari));
            prop_assert!((0.0..=1.0).contains(&nmi));
        }
    }
}
