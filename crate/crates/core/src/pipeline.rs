//! One offline surrogate-assisted run.
//!
//! Latin hypercube sampling produces the only data the optimizer ever sees.
//! A surrogate is trained on it, the EA evolves against the surrogate alone,
//! and the true objective is called exactly once more, on the final
//! best-by-surrogate individual, for reporting.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::benchmarks::ProblemSpec;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evolution::{evolve, EaConfig, Surrogate};
use crate::icn::{IcnConfig, IcnModel};
use crate::knowledge::{self, KnowledgeSpec, KnowledgeTerm};
use crate::rbfn::{train_ensemble, train_rbfn, EnsembleModel, RbfnModel};
use crate::rng::derive_seed;
use crate::sampling::lhs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SurrogateKind {
    #[serde(rename = "icn")]
    Icn,
    #[serde(rename = "icn+knowledge")]
    IcnKnowledge,
    #[serde(rename = "rbfn")]
    Rbfn,
    #[serde(rename = "rbfn-ensemble")]
    RbfnEnsemble,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 4] =
        [SurrogateKind::Icn, SurrogateKind::IcnKnowledge, SurrogateKind::Rbfn, SurrogateKind::RbfnEnsemble];

    pub fn key(self) -> &'static str {
        match self {
            SurrogateKind::Icn => "icn",
            SurrogateKind::IcnKnowledge => "icn+knowledge",
            SurrogateKind::Rbfn => "rbfn",
            SurrogateKind::RbfnEnsemble => "rbfn-ensemble",
        }
    }

    /// Human-readable label. The RBFN kinds are simplified stand-ins, not
    /// the tri-training or ensemble-selection algorithms they substitute for.
    pub fn label(self) -> &'static str {
        match self {
            SurrogateKind::Icn => "ICN-SAEA",
            SurrogateKind::IcnKnowledge => "ICN-SAEA + knowledge",
            SurrogateKind::Rbfn => "single RBFN (TT-DDEA stand-in)",
            SurrogateKind::RbfnEnsemble => "bagged RBFN ensemble (DDEA-SE stand-in)",
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SurrogateKind::ALL
            .into_iter()
            .find(|k| k.key() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub icn: IcnConfig,
    pub ea: EaConfig,
    /// Knowledge for the `icn+knowledge` kind.
    pub knowledge: Vec<KnowledgeSpec>,
    /// Members of the bagged RBFN ensemble.
    pub ensemble_size: usize,
    /// Offline samples per decision variable (`N_INI = factor · d`).
    pub offline_factor: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            icn: IcnConfig::default(),
            ea: EaConfig::default(),
            knowledge: Vec::new(),
            ensemble_size: 50,
            offline_factor: 11,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.icn.validate()?;
        self.ea.validate()?;
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be positive".into()));
        }
        if self.offline_factor == 0 {
            return Err(Error::Config("offline_factor must be positive".into()));
        }
        Ok(())
    }

    pub fn knowledge_terms(&self, dim: usize) -> Result<Vec<KnowledgeTerm>> {
        let mut terms = Vec::new();
        for k in &self.knowledge {
            terms.extend(k.resolve(dim)?);
        }
        Ok(terms)
    }
}

/// Wall-clock seconds spent in each phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub sample: f64,
    pub build: f64,
    pub evolve: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed { phase: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub problem: ProblemSpec,
    pub kind: SurrogateKind,
    pub seed: u64,
    pub n_offline: usize,
    /// Models trained to build the surrogate.
    pub n_models: usize,
    pub best_genome: Vec<f64>,
    pub surrogate_fitness: f64,
    pub true_fitness: f64,
    /// Calls to the true objective during the run.
    pub true_evals: usize,
    pub timings: PhaseTimings,
    /// Surrogate training RMSE per iteration (ICN kinds only).
    pub loss_curve: Vec<f64>,
    pub status: RunStatus,
}

impl RunResult {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

/// The true objective with a call counter.
pub struct CountingObjective {
    problem: ProblemSpec,
    calls: Cell<usize>,
}

impl CountingObjective {
    pub fn new(problem: ProblemSpec) -> Self {
        Self { problem, calls: Cell::new(0) }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.calls.set(self.calls.get() + 1);
        self.problem.evaluate(x)
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }
}

enum Built {
    Icn(IcnModel, Vec<f64>),
    Rbfn(RbfnModel),
    Ensemble(EnsembleModel),
}

impl Built {
    fn surrogate(&self) -> &dyn Surrogate {
        match self {
            Built::Icn(m, _) => m,
            Built::Rbfn(m) => m,
            Built::Ensemble(m) => m,
        }
    }
}

/// Seeds for the independent random streams of one run.
pub struct RunSeeds {
    pub data: u64,
    pub model: u64,
    pub init: u64,
    pub evolve: u64,
}

impl RunSeeds {
    pub fn from_run_seed(seed: u64) -> Self {
        Self {
            data: derive_seed(seed, 0),
            model: derive_seed(seed, 1),
            init: derive_seed(seed, 2),
            evolve: derive_seed(seed, 3),
        }
    }
}

fn build(kind: SurrogateKind, data: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<(Built, usize)> {
    Ok(match kind {
        SurrogateKind::Icn => {
            let icn_cfg = IcnConfig { seed, ..cfg.icn.clone() };
            let out = crate::icn::train(data, &icn_cfg)?;
            (Built::Icn(out.model, out.loss_curve), 1)
        }
        SurrogateKind::IcnKnowledge => {
            let icn_cfg = IcnConfig { seed, ..cfg.icn.clone() };
            let terms = cfg.knowledge_terms(data.dim())?;
            let out = knowledge::train_augmented(data, &icn_cfg, &terms)?;
            (Built::Icn(out.model, out.loss_curve), 1)
        }
        SurrogateKind::Rbfn => (Built::Rbfn(train_rbfn(data, seed)?), 1),
        SurrogateKind::RbfnEnsemble => {
            let m = train_ensemble(data, cfg.ensemble_size, seed)?;
            let n = m.members.len();
            (Built::Ensemble(m), n)
        }
    })
}

/// Runs sample → train → evolve → one true evaluation. Failures after
/// sampling are recorded in the result's status rather than returned as
/// errors; invalid configuration is an error.
pub fn run_offline(
    problem: &ProblemSpec,
    kind: SurrogateKind,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<RunResult> {
    cfg.validate()?;
    let objective = CountingObjective::new(*problem);
    run_offline_with(&objective, kind, cfg, seed)
}

/// As [`run_offline`], with a caller-owned objective so its call counter can
/// be inspected.
pub fn run_offline_with(
    objective: &CountingObjective,
    kind: SurrogateKind,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<RunResult> {
    let problem = objective.problem;
    let dim = problem.dim;
    let seeds = RunSeeds::from_run_seed(seed);
    let n_offline = cfg.offline_factor * dim;
    let start = Instant::now();
    let mut result = RunResult {
        problem,
        kind,
        seed,
        n_offline,
        n_models: 0,
        best_genome: Vec::new(),
        surrogate_fitness: f64::NAN,
        true_fitness: f64::NAN,
        true_evals: 0,
        timings: PhaseTimings::default(),
        loss_curve: Vec::new(),
        status: RunStatus::Ok,
    };

    let t = Instant::now();
    let points = lhs(n_offline, dim, seeds.data)?.points;
    let values = points.iter().map(|p| objective.evaluate(p)).collect::<Result<Vec<_>>>()?;
    let data = Dataset::new(points, values)?;
    result.timings.sample = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let built = build(kind, &data, cfg, seeds.model);
    result.timings.build = t.elapsed().as_secs_f64();
    let built = match built {
        Ok((b, n)) => {
            result.n_models = n;
            b
        }
        Err(e) => return Ok(failed(result, objective, "build", e, start)),
    };
    if let Built::Icn(_, curve) = &built {
        result.loss_curve = curve.clone();
    }

    let t = Instant::now();
    let ea = EaConfig { seed: seeds.evolve, ..cfg.ea.clone() };
    let init = lhs(ea.pop_size_for(dim), dim, seeds.init)?.points;
    let evolved = evolve(built.surrogate(), &ea, init);
    result.timings.evolve = t.elapsed().as_secs_f64();
    let evolved = match evolved {
        Ok(o) => o,
        Err(e) => return Ok(failed(result, objective, "evolve", e, start)),
    };

    result.true_fitness = objective.evaluate(&evolved.best.genome)?;
    result.best_genome = evolved.best.genome;
    result.surrogate_fitness = evolved.best.fitness;
    result.true_evals = objective.calls();
    result.timings.total = start.elapsed().as_secs_f64();
    Ok(result)
}

fn failed(
    mut result: RunResult,
    objective: &CountingObjective,
    phase: &str,
    err: Error,
    start: Instant,
) -> RunResult {
    result.status = RunStatus::Failed { phase: phase.into(), message: err.to_string() };
    result.true_evals = objective.calls();
    result.timings.total = start.elapsed().as_secs_f64();
    result
}
