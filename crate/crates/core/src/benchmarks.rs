//! Test problems on the normalized box `[0, 1]^d`.
//!
//! All functions are evaluated directly on the unit box, without remapping to
//! their usual domains. Every one is nonnegative there and reaches 0 at the
//! origin, except Rosenbrock which reaches 0 at the all-ones corner.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProblemKind {
    Ellipsoid,
    Rosenbrock,
    Ackley,
    Griewank,
    Rastrigin,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 5] = [
        ProblemKind::Ellipsoid,
        ProblemKind::Rosenbrock,
        ProblemKind::Ackley,
        ProblemKind::Griewank,
        ProblemKind::Rastrigin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Ellipsoid => "Ellipsoid",
            ProblemKind::Rosenbrock => "Rosenbrock",
            ProblemKind::Ackley => "Ackley",
            ProblemKind::Griewank => "Griewank",
            ProblemKind::Rastrigin => "Rastrigin",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown problem {s:?}")))
    }
}

/// Which algebraic form of Rosenbrock to evaluate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RosenbrockForm {
    /// `Σ 100(x_{i+1} − x_i²)² + (1 − x_i)²`
    #[default]
    Canonical,
    /// `Σ (1 − x_i)² + 100(x_{i+1} − x_i²)`, the valley term left unsquared.
    Unsquared,
}

/// A named benchmark at a fixed dimension, bounded by `[0, 1]` per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub dim: usize,
    #[serde(default)]
    pub rosenbrock_form: RosenbrockForm,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(contract!("problem dimension must be positive"));
        }
        Ok(Self { kind, dim, rosenbrock_form: RosenbrockForm::Canonical })
    }

    pub fn with_rosenbrock_form(mut self, form: RosenbrockForm) -> Self {
        self.rosenbrock_form = form;
        self
    }

    pub fn lower(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    pub fn upper(&self) -> Vec<f64> {
        vec![1.0; self.dim]
    }

    /// Known minimizer on the unit box.
    pub fn optimum(&self) -> Vec<f64> {
        match self.kind {
            ProblemKind::Rosenbrock => vec![1.0; self.dim],
            _ => vec![0.0; self.dim],
        }
    }

    /// Evaluates the problem; lower is better.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(contract!("point has {} coordinates, problem has {}", x.len(), self.dim));
        }
        if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(contract!("coordinate {i} = {v} lies outside [0, 1]"));
        }
        Ok(match self.kind {
            ProblemKind::Ellipsoid => ellipsoid(x),
            ProblemKind::Rosenbrock => rosenbrock(x, self.rosenbrock_form),
            ProblemKind::Ackley => ackley(x),
            ProblemKind::Griewank => griewank(x),
            ProblemKind::Rastrigin => rastrigin(x),
        })
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}d", self.kind, self.dim)
    }
}

/// `Σ i·x_i²` with 1-based `i`.
pub fn ellipsoid(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum()
}

pub fn rosenbrock(x: &[f64], form: RosenbrockForm) -> f64 {
    x.windows(2)
        .map(|w| {
            let valley = w[1] - w[0] * w[0];
            let valley = match form {
                RosenbrockForm::Canonical => valley * valley,
                RosenbrockForm::Unsquared => valley,
            };
            (1.0 - w[0]).powi(2) + 100.0 * valley
        })
        .sum()
}

/// Ackley with `a = 20`, `b = 0.2`, `c = 2π`.
pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    // grouped so both brackets are exactly 0 at the origin
    (20.0 - 20.0 * (-0.2 * sq.sqrt()).exp()) + (E - cs.exp())
}

pub fn griewank(x: &[f64]) -> f64 {
    let sum = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let prod: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .product();
    1.0 + sum - prod
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}
