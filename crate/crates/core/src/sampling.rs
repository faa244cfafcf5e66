//! Latin hypercube designs on the unit box.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
}

/// Draws `n` points in `[0, 1)^d` such that, in every dimension, each of the
/// `n` strata `[k/n, (k+1)/n)` holds exactly one point. Points are placed
/// uniformly at random within their stratum.
pub fn lhs(n: usize, d: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 || d == 0 {
        return Err(contract!("latin hypercube needs n >= 1 and d >= 1, got n={n}, d={d}"));
    }
    let mut rng = seeded(seed);
    let mut points = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(&mut rng);
        for (point, &k) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            // (k + u) / n can round up to the next stratum edge for u near 1
            let v = (k as f64 + u) / n as f64;
            let hi = (k + 1) as f64 / n as f64;
            point[j] = if v >= hi { hi.next_down() } else { v };
        }
    }
    Ok(SampleSet { points, seed })
}

/// Index of the stratum of `v` among `n` equal strata of `[0, 1)`.
pub fn stratum(v: f64, n: usize) -> usize {
    ((v * n as f64).floor() as usize).min(n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strata_ok(s: &SampleSet) -> bool {
        let n = s.points.len();
        let d = s.points[0].len();
        (0..d).all(|j| {
            let mut seen = vec![false; n];
            for p in &s.points {
                let v = p[j];
                // check with exact interval arithmetic, not via stratum()
                let k = (0..n)
                    .find(|&k| v >= k as f64 / n as f64 && v < (k + 1) as f64 / n as f64)
                    .expect("value outside [0,1)");
                if seen[k] {
                    return false;
                }
                seen[k] = true;
            }
            true
        })
    }

    #[test]
    fn four_points_one_dimension() {
        let s = lhs(4, 1, 7).unwrap();
        let mut v: Vec<f64> = s.points.iter().map(|p| p[0]).collect();
        v.sort_by(f64::total_cmp);
        for (k, x) in v.iter().enumerate() {
            assert!(*x >= k as f64 * 0.25 && *x < (k + 1) as f64 * 0.25);
        }
    }

    #[test]
    fn single_point() {
        let s = lhs(1, 5, 3).unwrap();
        assert_eq!(s.points.len(), 1);
        assert!(s.points[0].iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(lhs(20, 4, 11).unwrap(), lhs(20, 4, 11).unwrap());
        assert_ne!(lhs(20, 4, 11).unwrap().points, lhs(20, 4, 12).unwrap().points);
    }

    #[test]
    fn rejects_empty() {
        assert!(lhs(0, 3, 0).is_err());
        assert!(lhs(3, 0, 0).is_err());
    }

    #[test]
    fn stratified() {
        for (n, d) in [(2, 3), (17, 5), (110, 10)] {
            assert!(strata_ok(&lhs(n, d, n as u64).unwrap()));
        }
    }
}
