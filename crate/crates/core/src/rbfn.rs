//! Gaussian RBF network baselines.
//!
//! Centers come from k-means with `C = ⌈√N⌉` clusters, all basis functions
//! share one width equal to twice the mean pairwise distance between
//! centers, and the output layer (weights plus bias) is a ridge-regularized
//! least-squares fit. The ensemble variant averages members trained on
//! bootstrap resamples.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{contract, Result};
use crate::rng::{derive_seed, seeded};

/// Ridge penalty on the output weights, standing in for an exact
/// pseudo-inverse.
pub const RIDGE: f64 = 1e-8;

const KMEANS_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfnModel {
    pub centers: Vec<Vec<f64>>,
    pub spread: f64,
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// `⌈√n⌉`
pub fn center_count(n: usize) -> usize {
    let mut c = (n as f64).sqrt().floor() as usize;
    while c * c < n {
        c += 1;
    }
    while c > 0 && (c - 1) * (c - 1) >= n {
        c -= 1;
    }
    c
}

/// Twice the mean pairwise Euclidean distance between centers; 1 when there
/// is no pair or the centers coincide.
pub fn spread_for(centers: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            total += dist2(&centers[i], &centers[j]).sqrt();
            pairs += 1;
        }
    }
    if pairs == 0 || total == 0.0 {
        1.0
    } else {
        2.0 * total / pairs as f64
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd's k-means from `k` distinct random data rows. A cluster that loses
/// all its points is moved to the point farthest from its current center.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(contract!("k-means needs 1 <= k <= {n}, got k = {k}"));
    }
    let d = points[0].len();
    let mut rng = seeded(seed);
    let mut init: Vec<usize> = sample(&mut rng, n, k).into_vec();
    init.sort_unstable();
    let mut centers: Vec<Vec<f64>> = init.iter().map(|&i| points[i].clone()).collect();
    let mut assign = vec![usize::MAX; n];

    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (j, _) = nearest(p, &centers);
            if assign[i] != j {
                assign[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &j) in points.iter().zip(&assign) {
            counts[j] += 1;
            sums[j].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist2(&points[a], &centers[assign[a]]);
                        let db = dist2(&points[b], &centers[assign[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("nonempty");
                centers[j] = points[far].clone();
                counts[assign[far]] -= 1;
                assign[far] = j;
                counts[j] = 1;
            }
        }
    }
    Ok(centers)
}

impl RbfnModel {
    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let denom = 2.0 * self.spread * self.spread;
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * (-dist2(x, c) / denom).exp())
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let d = self.dim();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(contract!("query has {} coordinates, model expects {d}", p.len()));
        }
        Ok(points.iter().map(|p| self.predict_one(p)).collect())
    }
}

/// Trains with `⌈√N⌉` k-means centers.
pub fn train_rbfn(data: &Dataset, seed: u64) -> Result<RbfnModel> {
    train_rbfn_with_k(data, center_count(data.len()), seed)
}

/// Trains with an explicit center count.
pub fn train_rbfn_with_k(data: &Dataset, k: usize, seed: u64) -> Result<RbfnModel> {
    if data.len() < 2 {
        return Err(contract!("RBFN training needs at least 2 points"));
    }
    let first = &data.points()[0];
    if data.points().iter().all(|p| p == first) {
        return Err(contract!("RBFN training data is degenerate: all points coincide"));
    }
    let centers = kmeans(data.points(), k, seed)?;
    let spread = spread_for(&centers);
    let (weights, bias) = fit_output_layer(data, &centers, spread);
    Ok(RbfnModel { centers, spread, weights, bias })
}

/// Ridge least squares on the Gaussian design with an unpenalized bias:
/// columns and targets are centered, the weights solved through the SVD as
/// `w = V diag(s / (s² + λ)) Uᵀ y`, and the bias restores the means.
fn fit_output_layer(data: &Dataset, centers: &[Vec<f64>], spread: f64) -> (Vec<f64>, f64) {
    let n = data.len();
    let c = centers.len();
    let denom = 2.0 * spread * spread;
    let mut phi = DMatrix::from_fn(n, c, |i, j| (-dist2(&data.points()[i], &centers[j]) / denom).exp());
    let col_means: Vec<f64> = (0..c).map(|j| phi.column(j).mean()).collect();
    for (j, m) in col_means.iter().enumerate() {
        phi.column_mut(j).add_scalar_mut(-m);
    }
    let y_mean = data.values().iter().sum::<f64>() / n as f64;
    let y = DVector::from_iterator(n, data.values().iter().map(|v| v - y_mean));
    let svd = phi.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let uty = u.transpose() * y;
    let scaled = DVector::from_iterator(
        svd.singular_values.len(),
        svd.singular_values
            .iter()
            .zip(uty.iter())
            .map(|(s, b)| s / (s * s + RIDGE) * b),
    );
    let w: Vec<f64> = (v_t.transpose() * scaled).iter().copied().collect();
    let bias = y_mean - w.iter().zip(&col_means).map(|(a, b)| a * b).sum::<f64>();
    (w, bias)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub members: Vec<RbfnModel>,
}

impl EnsembleModel {
    pub fn predict(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; points.len()];
        for m in &self.members {
            for (a, p) in acc.iter_mut().zip(m.predict(points)?) {
                *a += p;
            }
        }
        let k = self.members.len() as f64;
        Ok(acc.into_iter().map(|a| a / k).collect())
    }
}

/// Seed for ensemble member `i`.
pub fn member_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, i as u64)
}

/// `m` members, each fit to a bootstrap resample of `data`.
pub fn train_ensemble(data: &Dataset, m: usize, seed: u64) -> Result<EnsembleModel> {
    if m == 0 {
        return Err(contract!("ensemble needs at least one member"));
    }
    let n = data.len();
    let mut rng = seeded(seed);
    let resamples: Vec<Vec<usize>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect();
    train_ensemble_on(data, &resamples, seed)
}

/// Ensemble from explicit resample index lists. A bootstrap that happens to
/// draw a single distinct point falls back to the full dataset.
pub fn train_ensemble_on(data: &Dataset, resamples: &[Vec<usize>], seed: u64) -> Result<EnsembleModel> {
    if resamples.is_empty() {
        return Err(contract!("ensemble needs at least one member"));
    }
    let members = resamples
        .iter()
        .enumerate()
        .map(|(i, idx)| {
            let sub = data.subset(idx)?;
            let first = &sub.points()[0];
            let sub = if sub.points().iter().all(|p| p == first) { data.clone() } else { sub };
            train_rbfn(&sub, member_seed(seed, i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel { members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::lhs;

    // Box–Muller
    fn normal_pair(rng: &mut crate::rng::Rng) -> (f64, f64) {
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        (r * t.cos(), r * t.sin())
    }

    fn smooth(x: &[f64]) -> f64 {
        (x.iter().sum::<f64>()).sin() + 0.5 * x[0] * x[0]
    }

    fn smooth_data(n: usize, d: usize, seed: u64) -> Dataset {
        let pts = lhs(n, d, seed).unwrap().points;
        let vals = pts.iter().map(|p| smooth(p)).collect();
        Dataset::new(pts, vals).unwrap()
    }

    #[test]
    fn center_count_is_ceil_sqrt() {
        for (n, c) in [(1, 1), (2, 2), (4, 2), (5, 3), (9, 3), (10, 4), (110, 11), (121, 11), (122, 12)] {
            assert_eq!(center_count(n), c, "n = {n}");
        }
    }

    #[test]
    fn kmeans_trivial_cases() {
        let pts = lhs(7, 3, 2).unwrap().points;
        let mut all = kmeans(&pts, 7, 1).unwrap();
        let mut sorted = pts.clone();
        all.sort_by(|a, b| a[0].total_cmp(&b[0]));
        sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(all, sorted);

        let one = kmeans(&pts, 1, 1).unwrap();
        for j in 0..3 {
            let mean = pts.iter().map(|p| p[j]).sum::<f64>() / 7.0;
            assert!((one[0][j] - mean).abs() < 1e-15);
        }
        assert!(kmeans(&pts, 8, 1).is_err());
    }

    #[test]
    fn kmeans_separates_blobs() {
        let mut rng = seeded(9);
        let sigma = 0.01;
        let mut pts = Vec::new();
        for (cx, cy) in [(0.3, 0.5), (0.3 + 10.0 * sigma, 0.5)] {
            for _ in 0..20 {
                let (a, b) = normal_pair(&mut rng);
                pts.push(vec![cx + sigma * a, cy + sigma * b]);
            }
        }
        for seed in 0..10 {
            let c = kmeans(&pts, 2, seed).unwrap();
            let label = |p: &Vec<f64>| nearest(p, &c).0;
            let l0 = label(&pts[0]);
            let l1 = label(&pts[20]);
            assert_ne!(l0, l1);
            assert!(pts[..20].iter().all(|p| label(p) == l0));
            assert!(pts[20..].iter().all(|p| label(p) == l1));
        }
    }

    #[test]
    fn stored_rules_match_recomputation() {
        let data = smooth_data(110, 10, 4);
        let m = train_rbfn(&data, 3).unwrap();
        assert_eq!(m.centers.len(), 11);
        let mut total = 0.0;
        let mut pairs = 0.0;
        for i in 0..m.centers.len() {
            for j in 0..i {
                let d: f64 = m.centers[i]
                    .iter()
                    .zip(&m.centers[j])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                total += d;
                pairs += 1.0;
            }
        }
        assert!((m.spread - 2.0 * total / pairs).abs() < 1e-12);
    }

    #[test]
    fn interpolates_when_every_point_is_a_center() {
        let data = smooth_data(8, 10, 8);
        let m = train_rbfn_with_k(&data, data.len(), 0).unwrap();
        let pred = m.predict(data.points()).unwrap();
        let rmse = (pred
            .iter()
            .zip(data.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / data.len() as f64)
            .sqrt();
        assert!(rmse < 1e-6, "rmse = {rmse}");
    }

    #[test]
    fn constant_targets_are_absorbed_by_bias() {
        let pts = lhs(30, 4, 1).unwrap().points;
        let data = Dataset::new(pts.clone(), vec![3.25; 30]).unwrap();
        let m = train_rbfn(&data, 0).unwrap();
        for v in m.predict(&lhs(20, 4, 2).unwrap().points).unwrap() {
            assert!((v - 3.25).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = smooth_data(40, 5, 2);
        assert_eq!(train_rbfn(&data, 6).unwrap(), train_rbfn(&data, 6).unwrap());
    }

    #[test]
    fn degenerate_and_tiny_data_rejected() {
        let data = Dataset::new(vec![vec![0.5, 0.5]; 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(train_rbfn(&data, 0).is_err());
        let one = Dataset::new(vec![vec![0.5]], vec![1.0]).unwrap();
        assert!(train_rbfn(&one, 0).is_err());
    }

    #[test]
    fn predict_edge_cases() {
        let m = RbfnModel { centers: vec![vec![0.3, 0.4]], spread: 0.1, weights: vec![2.5], bias: -1.0 };
        assert_eq!(m.predict(&[vec![0.3, 0.4]]).unwrap(), vec![1.5]);
        assert!((m.predict_one(&[50.0, 50.0]) + 1.0).abs() < 1e-12);
        assert!(m.predict(&[vec![0.3]]).is_err());
    }

    #[test]
    fn prediction_is_continuous() {
        let data = smooth_data(50, 4, 3);
        let m = train_rbfn(&data, 1).unwrap();
        let q = lhs(30, 4, 10).unwrap().points;
        for p in q {
            let mut p2 = p.clone();
            p2[0] += 1e-9;
            assert!((m.predict_one(&p) - m.predict_one(&p2)).abs() < 1e-6);
        }
    }

    #[test]
    fn identity_resample_ensemble_equals_single_model() {
        let data = smooth_data(30, 3, 5);
        let ident: Vec<usize> = (0..30).collect();
        let e = train_ensemble_on(&data, &[ident], 77).unwrap();
        let single = train_rbfn(&data, member_seed(77, 0)).unwrap();
        assert_eq!(e.members[0], single);
        let q = lhs(10, 3, 1).unwrap().points;
        assert_eq!(e.predict(&q).unwrap(), single.predict(&q).unwrap());
    }

    #[test]
    fn ensemble_mean_within_member_range() {
        let data = smooth_data(40, 4, 6);
        let e = train_ensemble(&data, 7, 3).unwrap();
        let q = lhs(25, 4, 9).unwrap().points;
        let mean = e.predict(&q).unwrap();
        for (i, v) in mean.iter().enumerate() {
            let member: Vec<f64> = e.members.iter().map(|m| m.predict_one(&q[i])).collect();
            let lo = member.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = member.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
        assert!(train_ensemble(&data, 0, 3).is_err());
    }

    /// Bagging should reduce seed-to-seed variance of held-out predictions.
    #[test]
    fn ensemble_reduces_prediction_variance() {
        let d = 5;
        let held = lhs(30, d, 1234).unwrap().points;
        let mut singles = vec![Vec::new(); held.len()];
        let mut bagged = vec![Vec::new(); held.len()];
        for s in 0..10u64 {
            // fresh data per seed so both models see the same sampling noise
            let data = smooth_data(55, d, 100 + s);
            let a = train_rbfn(&data, s).unwrap().predict(&held).unwrap();
            let b = train_ensemble(&data, 10, s).unwrap().predict(&held).unwrap();
            for i in 0..held.len() {
                singles[i].push(a[i]);
                bagged[i].push(b[i]);
            }
        }
        let var = |v: &Vec<f64>| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let vs: f64 = singles.iter().map(var).sum();
        let vb: f64 = bagged.iter().map(var).sum();
        assert!(vb <= vs, "bagged {vb} vs single {vs}");
    }
}
