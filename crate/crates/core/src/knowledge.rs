//! Analytic prior knowledge as frozen ICN kernels.
//!
//! A knowledge term is a product of linear forms of the input channels,
//! `coeff · Π_l (w_l · x)`. Each linear form becomes a kernel whose only
//! nonzero taps sit at the center of each channel, so the convolution is a
//! per-pixel weighted sum of the sample's coordinates. The kernels never
//! train; the coefficient does, alongside the base network.
//!
//! For Rosenbrock two built-in families exist. The weak family encodes
//! `Σ x_{i+1}²`. The strong family encodes `Σ (x_{i+1} − x_i)²` by multiplying
//! two identical `(−1 at i, +1 at i+1)` forms; a literal variant encodes the
//! unsquared `Σ (x_{i+1} − x_i)` with a single layer per term.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{contract, Result};
use crate::icn::{self, IcnConfig, IcnModel, ProductTerm, TrainOutcome};
use crate::tensor::Kernel3;

/// Center-tap weights, one per input channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearFormSpec {
    pub weights: Vec<f64>,
}

impl LinearFormSpec {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().all(|&w| w == 0.0) {
            return Err(contract!("linear form needs at least one nonzero weight"));
        }
        Ok(Self { weights })
    }

    /// Weight `w` on channel `i`, zero elsewhere.
    pub fn one_hot(d: usize, i: usize, w: f64) -> Result<Self> {
        let mut weights = vec![0.0; d];
        weights[i] = w;
        Self::new(weights)
    }

    pub fn apply(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeTerm {
    pub layers: Vec<LinearFormSpec>,
    #[serde(default = "unit")]
    pub coeff: f64,
}

fn unit() -> f64 {
    1.0
}

impl KnowledgeTerm {
    pub fn new(layers: Vec<LinearFormSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(contract!("knowledge term needs at least one layer"));
        }
        Ok(Self { layers, coeff: 1.0 })
    }

    /// Analytic value `coeff · Π_l (w_l · x)` at one sample.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.coeff * self.layers.iter().map(|l| l.apply(x)).product::<f64>()
    }

    pub fn compile(&self, d: usize, kernel_side: usize) -> Result<ProductTerm> {
        ProductTerm::new(compile_term(self, d, kernel_side)?, self.coeff)
    }
}

/// One `d`-deep `L×L` kernel per layer, center taps from the layer weights.
pub fn compile_term(term: &KnowledgeTerm, d: usize, kernel_side: usize) -> Result<Vec<Kernel3>> {
    if term.layers.is_empty() {
        return Err(contract!("knowledge term needs at least one layer"));
    }
    term.layers
        .iter()
        .map(|l| {
            if l.weights.len() != d {
                return Err(contract!(
                    "linear form has {} weights, problem dimension is {d}",
                    l.weights.len()
                ));
            }
            Kernel3::center_only(&l.weights, kernel_side, kernel_side)
        })
        .collect()
}

/// `Σ_{i=1}^{d-1} x_{i+1}²`, one squared one-hot term per `i`.
pub fn weak_rosenbrock_terms(d: usize) -> Result<Vec<KnowledgeTerm>> {
    if d < 2 {
        return Err(contract!("Rosenbrock knowledge needs d >= 2, got {d}"));
    }
    (1..d)
        .map(|i| {
            let form = LinearFormSpec::one_hot(d, i, 1.0)?;
            KnowledgeTerm::new(vec![form.clone(), form])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrongForm {
    /// `Σ (x_{i+1} − x_i)²`: two identical difference kernels multiplied.
    #[default]
    Squared,
    /// `Σ (x_{i+1} − x_i)`: a single difference kernel.
    Literal,
}

pub fn strong_rosenbrock_terms(d: usize, form: StrongForm) -> Result<Vec<KnowledgeTerm>> {
    if d < 2 {
        return Err(contract!("Rosenbrock knowledge needs d >= 2, got {d}"));
    }
    (0..d - 1)
        .map(|i| {
            let mut w = vec![0.0; d];
            w[i] = -1.0;
            w[i + 1] = 1.0;
            let diff = LinearFormSpec::new(w)?;
            let layers = match form {
                StrongForm::Squared => vec![diff.clone(), diff],
                StrongForm::Literal => vec![diff],
            };
            KnowledgeTerm::new(layers)
        })
        .collect()
}

/// Knowledge as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KnowledgeSpec {
    Builtin { builtin: BuiltinKnowledge },
    Custom { layers: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinKnowledge {
    RosenbrockWeak,
    RosenbrockStrong,
    RosenbrockStrongLiteral,
}

impl KnowledgeSpec {
    pub fn resolve(&self, d: usize) -> Result<Vec<KnowledgeTerm>> {
        match self {
            KnowledgeSpec::Builtin { builtin } => match builtin {
                BuiltinKnowledge::RosenbrockWeak => weak_rosenbrock_terms(d),
                BuiltinKnowledge::RosenbrockStrong => strong_rosenbrock_terms(d, StrongForm::Squared),
                BuiltinKnowledge::RosenbrockStrongLiteral => {
                    strong_rosenbrock_terms(d, StrongForm::Literal)
                }
            },
            KnowledgeSpec::Custom { layers } => {
                let forms = layers
                    .iter()
                    .map(|w| LinearFormSpec::new(w.clone()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(vec![KnowledgeTerm::new(forms)?])
            }
        }
    }
}

/// Trains a base ICN jointly with the coefficients of `terms`. With no terms
/// this is exactly [`icn::train`].
pub fn train_augmented(
    data: &Dataset,
    cfg: &IcnConfig,
    terms: &[KnowledgeTerm],
) -> Result<TrainOutcome> {
    train_augmented_monitored(data, cfg, terms, |_, _| {})
}

pub fn train_augmented_monitored(
    data: &Dataset,
    cfg: &IcnConfig,
    terms: &[KnowledgeTerm],
    monitor: impl FnMut(usize, &IcnModel),
) -> Result<TrainOutcome> {
    let compiled = terms
        .iter()
        .map(|t| t.compile(data.dim(), cfg.kernel_side))
        .collect::<Result<Vec<_>>>()?;
    icn::train_with_terms(data, cfg, compiled, monitor)
}
