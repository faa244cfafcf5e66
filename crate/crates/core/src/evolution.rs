//! Real-coded evolutionary search driven only by a surrogate.
//!
//! Each generation draws parents by binary tournament, recombines them with
//! simulated binary crossover (SBX), applies bounded polynomial mutation, and
//! keeps the best `pop_size` of parents plus offspring. Genomes live in
//! `[0, 1]^d`; operator outputs are clipped back into the box.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::icn::IcnModel;
use crate::rbfn::{EnsembleModel, RbfnModel};
use crate::rng::{seeded, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EaConfig {
    /// `None` means `11·d`, rounded up to even.
    pub pop_size: Option<usize>,
    pub generations: usize,
    pub p_crossover: f64,
    /// `None` means `1/d`.
    pub p_mutation: Option<f64>,
    pub eta_c: f64,
    pub eta_m: f64,
    pub seed: u64,
}

impl Default for EaConfig {
    fn default() -> Self {
        Self {
            pop_size: None,
            generations: 200,
            p_crossover: 1.0,
            p_mutation: None,
            eta_c: 15.0,
            eta_m: 15.0,
            seed: 0,
        }
    }
}

impl EaConfig {
    pub fn pop_size_for(&self, dim: usize) -> usize {
        let p = self.pop_size.unwrap_or(11 * dim);
        p + p % 2
    }

    pub fn p_mutation_for(&self, dim: usize) -> f64 {
        self.p_mutation.unwrap_or(1.0 / dim as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pop_size == Some(0) {
            return Err(contract!("pop_size must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p_crossover) {
            return Err(contract!("p_crossover must lie in [0, 1]"));
        }
        if let Some(p) = self.p_mutation {
            if !(0.0..=1.0).contains(&p) {
                return Err(contract!("p_mutation must lie in [0, 1]"));
            }
        }
        if !(self.eta_c > 0.0 && self.eta_m > 0.0) {
            return Err(contract!("distribution indices must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Vec<f64>,
    /// Surrogate value; lower is better.
    pub fitness: f64,
}

/// Anything that scores a batch of points. Batches arrive in population
/// index order, which matters for models whose predictions depend on
/// neighbouring samples.
pub trait Surrogate {
    fn predict_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>>;
}

impl Surrogate for IcnModel {
    fn predict_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.predict(points)
    }
}

impl Surrogate for RbfnModel {
    fn predict_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.predict(points)
    }
}

impl Surrogate for EnsembleModel {
    fn predict_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.predict(points)
    }
}

/// Adapts a pointwise function into a [`Surrogate`].
pub struct Pointwise<F>(pub F);

impl<F: Fn(&[f64]) -> f64> Surrogate for Pointwise<F> {
    fn predict_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(points.iter().map(|p| (self.0)(p)).collect())
    }
}

/// SBX spread factor for a uniform draw `u`.
pub fn sbx_beta(u: f64, eta: f64) -> f64 {
    let e = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(e)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(e)
    }
}

/// SBX children before clipping, one uniform draw per gene.
pub fn sbx_unclipped(p1: &[f64], p2: &[f64], eta: f64, draws: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if p1.len() != p2.len() || p1.len() != draws.len() {
        return Err(contract!("SBX parents and draws must share a length"));
    }
    let mut c1 = Vec::with_capacity(p1.len());
    let mut c2 = Vec::with_capacity(p1.len());
    for ((&a, &b), &u) in p1.iter().zip(p2).zip(draws) {
        if a == b {
            c1.push(a);
            c2.push(b);
            continue;
        }
        let beta = sbx_beta(u, eta);
        c1.push(0.5 * ((1.0 + beta) * a + (1.0 - beta) * b));
        c2.push(0.5 * ((1.0 - beta) * a + (1.0 + beta) * b));
    }
    Ok((c1, c2))
}

/// Simulated binary crossover, clipped to `[0, 1]`.
pub fn sbx(p1: &[f64], p2: &[f64], eta: f64, rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    if p1.len() != p2.len() {
        return Err(contract!("SBX parents differ in length: {} vs {}", p1.len(), p2.len()));
    }
    let draws: Vec<f64> = (0..p1.len()).map(|_| rng.random()).collect();
    let (mut c1, mut c2) = sbx_unclipped(p1, p2, eta, &draws)?;
    clip(&mut c1);
    clip(&mut c2);
    Ok((c1, c2))
}

fn clip(g: &mut [f64]) {
    g.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

/// Bounded polynomial mutation on `[0, 1]`, each gene with probability `p_m`.
pub fn poly_mutate(genome: &[f64], p_m: f64, eta: f64, rng: &mut Rng) -> Vec<f64> {
    let pow = 1.0 / (eta + 1.0);
    genome
        .iter()
        .map(|&y| {
            if p_m <= 0.0 || rng.random::<f64>() >= p_m {
                return y;
            }
            let r: f64 = rng.random();
            let dq = if r < 0.5 {
                let xy = 1.0 - y;
                let val = 2.0 * r + (1.0 - 2.0 * r) * xy.powf(eta + 1.0);
                val.powf(pow) - 1.0
            } else {
                let xy = y;
                let val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * xy.powf(eta + 1.0);
                1.0 - val.powf(pow)
            };
            (y + dq).clamp(0.0, 1.0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveOutcome {
    pub best: Individual,
    /// Best surrogate fitness after initialization and after each generation.
    pub history: Vec<f64>,
    /// Final population, sorted best first.
    pub population: Vec<Individual>,
}

fn score(surrogate: &dyn Surrogate, genomes: Vec<Vec<f64>>, generation: usize) -> Result<Vec<Individual>> {
    let fit = surrogate.predict_batch(&genomes)?;
    if fit.len() != genomes.len() {
        return Err(contract!("surrogate returned {} values for {} points", fit.len(), genomes.len()));
    }
    if let Some(index) = fit.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSurrogate { generation, index });
    }
    Ok(genomes
        .into_iter()
        .zip(fit)
        .map(|(genome, fitness)| Individual { genome, fitness })
        .collect())
}

/// Stable sort by fitness, so equal scores keep their index order.
fn sort_population(pop: &mut [Individual]) {
    pop.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
}

fn tournament(pop: &[Individual], rng: &mut Rng) -> usize {
    let a = rng.random_range(0..pop.len());
    let b = rng.random_range(0..pop.len());
    match pop[a].fitness.total_cmp(&pop[b].fitness) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => a.min(b),
    }
}

/// Runs `cfg.generations` generations from `init` (exactly `pop_size`
/// genomes in `[0, 1]^d`).
pub fn evolve(surrogate: &dyn Surrogate, cfg: &EaConfig, init: Vec<Vec<f64>>) -> Result<EvolveOutcome> {
    cfg.validate()?;
    let dim = init.first().ok_or_else(|| contract!("empty initial population"))?.len();
    let pop_size = cfg.pop_size_for(dim);
    if init.len() != pop_size {
        return Err(contract!("initial population has {} genomes, expected {pop_size}", init.len()));
    }
    crate::dataset::check_points(&init, dim)?;
    let p_m = cfg.p_mutation_for(dim);
    let mut rng = seeded(cfg.seed);

    let mut pop = score(surrogate, init, 0)?;
    sort_population(&mut pop);
    let mut history = Vec::with_capacity(cfg.generations + 1);
    history.push(pop[0].fitness);

    for gen in 1..=cfg.generations {
        let mut children = Vec::with_capacity(pop_size);
        while children.len() < pop_size {
            let a = tournament(&pop, &mut rng);
            let b = tournament(&pop, &mut rng);
            let (c1, c2) = if rng.random::<f64>() < cfg.p_crossover {
                sbx(&pop[a].genome, &pop[b].genome, cfg.eta_c, &mut rng)?
            } else {
                (pop[a].genome.clone(), pop[b].genome.clone())
            };
            children.push(poly_mutate(&c1, p_m, cfg.eta_m, &mut rng));
            children.push(poly_mutate(&c2, p_m, cfg.eta_m, &mut rng));
        }
        children.truncate(pop_size);
        let offspring = score(surrogate, children, gen)?;
        pop.extend(offspring);
        sort_population(&mut pop);
        pop.truncate(pop_size);
        history.push(pop[0].fitness);
    }
    Ok(EvolveOutcome { best: pop[0].clone(), history, population: pop })
}
