//! Offline data: sample points with their true fitness values.

use serde::{Deserialize, Serialize};

use crate::benchmarks::ProblemSpec;
use crate::error::{contract, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(contract!("dataset is empty"));
        }
        if points.len() != values.len() {
            return Err(contract!("{} points but {} values", points.len(), values.len()));
        }
        let d = points[0].len();
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(contract!("points must share a positive dimension"));
        }
        Ok(Self { points, values })
    }

    /// Evaluates `problem` at every point.
    pub fn from_problem(problem: &ProblemSpec, points: Vec<Vec<f64>>) -> Result<Self> {
        let values = points.iter().map(|p| problem.evaluate(p)).collect::<Result<Vec<_>>>()?;
        Self::new(points, values)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Rows selected by `indices`, in that order (repeats allowed).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let values = indices.iter().map(|&i| self.values[i]).collect();
        Self::new(points, values)
    }

    /// Splits into the first `n_first` rows and the rest.
    pub fn split_at(&self, n_first: usize) -> Result<(Self, Self)> {
        if n_first == 0 || n_first >= self.len() {
            return Err(contract!("split point {n_first} leaves an empty side"));
        }
        let first: Vec<usize> = (0..n_first).collect();
        let rest: Vec<usize> = (n_first..self.len()).collect();
        Ok((self.subset(&first)?, self.subset(&rest)?))
    }
}

/// Checks that every point has `d` coordinates in `[0, 1]`.
pub(crate) fn check_points(points: &[Vec<f64>], d: usize) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if p.len() != d {
            return Err(contract!("point {i} has {} coordinates, expected {d}", p.len()));
        }
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(contract!("point {i} lies outside [0, 1]^{d}"));
        }
    }
    Ok(())
}
