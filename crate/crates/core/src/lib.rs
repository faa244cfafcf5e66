//! Offline surrogate-assisted evolutionary optimization with an
//! interpretable convolutional network (ICN) surrogate.
//!
//! The crate is layered bottom-up:
//!
//! - [`tensor`]: grids, kernels, same-size convolution, products.
//! - [`icn`]: the ICN surrogate (packing, forward, gradients, training).
//! - [`knowledge`]: analytic terms compiled into frozen ICN kernels.
//! - [`rbfn`]: RBF network baselines (single model and bagged ensemble).
//! - [`benchmarks`], [`sampling`]: test problems and Latin hypercube data.
//! - [`evolution`]: real-coded EA (SBX, polynomial mutation, elitism).
//! - [`pipeline`]: one offline run from sampling to final true evaluation.
//! - [`stats`]: Wilcoxon signed-rank test and comparison tables.
//! - [`experiment`]: config files, run grids, CSV/JSON output and reports.

pub mod benchmarks;
pub mod dataset;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod icn;
pub mod knowledge;
pub mod pipeline;
pub mod rbfn;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod tensor;

pub use benchmarks::{ProblemKind, ProblemSpec, RosenbrockForm};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use icn::{IcnConfig, IcnModel, IcnParams, ImageBatch, ProductTerm, TargetScaler};
