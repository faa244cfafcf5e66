//! Experiment grids: configuration files, run dispatch, result files and
//! reports.
//!
//! A results directory holds
//!
//! - `runs.csv`: one row per finished run, in completion order;
//! - `runs/*.json`: the full [`RunRecord`] of each run, timings included;
//! - `summary.csv`, `summary.txt`: the comparison table;
//! - `timing.txt`: mean wall-clock time per phase.
//!
//! Rows carry no timings, so a run's row depends only on its configuration
//! and seeds.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{ProblemKind, ProblemSpec, RosenbrockForm};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::icn::IcnConfig;
use crate::knowledge::{strong_rosenbrock_terms, train_augmented_monitored, weak_rosenbrock_terms, StrongForm};
use crate::pipeline::{run_offline, PipelineConfig, RunResult, RunStatus, SurrogateKind};
use crate::rng::derive_seed;
use crate::sampling::lhs;
use crate::stats::{summarize, Observation, Summary};

/// First line of every `runs.csv`.
pub const RUNS_VERSION_LINE: &str = "# icn-saea runs v1";
pub const RUNS_COLUMNS: [&str; 14] = [
    "problem",
    "dim",
    "rosenbrock_form",
    "algorithm",
    "repeat",
    "master_seed",
    "run_seed",
    "status",
    "n_offline",
    "n_models",
    "true_evals",
    "surrogate_fitness",
    "true_fitness",
    "best_genome",
];

/// One benchmark instance in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemEntry {
    pub name: ProblemKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "is_canonical")]
    pub rosenbrock_form: RosenbrockForm,
}

fn is_canonical(f: &RosenbrockForm) -> bool {
    *f == RosenbrockForm::Canonical
}

impl ProblemEntry {
    pub fn spec(&self) -> Result<ProblemSpec> {
        Ok(ProblemSpec::new(self.name, self.dim)?.with_rosenbrock_form(self.rosenbrock_form))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problems: Vec<ProblemEntry>,
    pub algorithms: Vec<SurrogateKind>,
    pub repeats: usize,
    /// Master seed; run `r` uses `derive_seed(seed, r)`.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub pipeline: PipelineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problems: Vec::new(),
            algorithms: vec![SurrogateKind::Icn, SurrogateKind::Rbfn, SurrogateKind::RbfnEnsemble],
            repeats: 20,
            seed: 0,
            out_dir: PathBuf::from("results"),
            pipeline: PipelineConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON config. Errors name `origin` and the
    /// line they refer to.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("{origin}:{}:{}: {}", e.line(), e.column(), strip_position(&e)))
        })?;
        cfg.validate().map_err(|(key, msg)| {
            let line = text.lines().position(|l| l.contains(&format!("\"{key}\""))).map_or(1, |i| i + 1);
            Error::Config(format!("{origin}:{line}: {msg}"))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Pretty JSON with fields in declaration order; parsing it gives back
    /// an equal config.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Checks everything that would otherwise fail mid-experiment. The error
    /// carries the offending key for line lookup.
    fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.problems.is_empty() {
            return Err(("problems", "at least one problem is required".into()));
        }
        for p in &self.problems {
            let spec = p.spec().map_err(|e| ("problems", e.to_string()))?;
            if spec.kind == ProblemKind::Rosenbrock && spec.dim < 2 {
                return Err(("problems", "Rosenbrock needs dim >= 2".into()));
            }
            self.pipeline.knowledge_terms(spec.dim).map_err(|e| ("knowledge", e.to_string()))?;
        }
        if self.algorithms.is_empty() {
            return Err(("algorithms", "at least one algorithm is required".into()));
        }
        let unique: BTreeSet<_> = self.algorithms.iter().collect();
        if unique.len() != self.algorithms.len() {
            return Err(("algorithms", "algorithms must not repeat".into()));
        }
        if self.algorithms.contains(&SurrogateKind::IcnKnowledge) && self.pipeline.knowledge.is_empty() {
            return Err(("algorithms", "icn+knowledge needs at least one pipeline.knowledge entry".into()));
        }
        if self.repeats == 0 {
            return Err(("repeats", "repeats must be positive".into()));
        }
        self.pipeline.validate().map_err(|e| ("pipeline", e.to_string()))?;
        Ok(())
    }

    /// Every run of the grid, problem-major.
    pub fn tasks(&self) -> Result<Vec<RunKey>> {
        let mut out = Vec::new();
        for p in &self.problems {
            let problem = p.spec()?;
            for &algorithm in &self.algorithms {
                for repeat in 0..self.repeats {
                    out.push(RunKey { problem, algorithm, repeat, master_seed: self.seed });
                }
            }
        }
        Ok(out)
    }
}

fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub problem: ProblemSpec,
    pub algorithm: SurrogateKind,
    pub repeat: usize,
    pub master_seed: u64,
}

impl RunKey {
    /// Same for every algorithm and problem at a given repeat, so compared
    /// algorithms see the same offline sample for equal dimensions.
    pub fn run_seed(&self) -> u64 {
        derive_seed(self.master_seed, self.repeat as u64)
    }

    fn file_stem(&self) -> String {
        format!("{}_{}_r{}", problem_label(&self.problem), self.algorithm.key(), self.repeat)
    }
}

/// `Ellipsoid-10d`, or `Rosenbrock-10d-unsquared` for the variant form.
pub fn problem_label(p: &ProblemSpec) -> String {
    match p.rosenbrock_form {
        RosenbrockForm::Unsquared if p.kind == ProblemKind::Rosenbrock => format!("{p}-unsquared"),
        _ => p.to_string(),
    }
}

/// A finished run as stored in `runs/*.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub key: RunKey,
    pub run_seed: u64,
    pub result: RunResult,
}

/// Executes one run of the grid.
pub fn single_run(pipeline: &PipelineConfig, key: RunKey) -> Result<RunRecord> {
    let run_seed = key.run_seed();
    let result = run_offline(&key.problem, key.algorithm, pipeline, run_seed)?;
    Ok(RunRecord { key, run_seed, result })
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl RunRecord {
    pub fn csv_fields(&self) -> Vec<String> {
        let r = &self.result;
        let status = match &r.status {
            RunStatus::Ok => "ok".to_string(),
            RunStatus::Failed { phase, .. } => format!("failed:{phase}"),
        };
        let form = match r.problem.rosenbrock_form {
            RosenbrockForm::Canonical => "canonical",
            RosenbrockForm::Unsquared => "unsquared",
        };
        vec![
            r.problem.kind.name().into(),
            r.problem.dim.to_string(),
            form.into(),
            r.kind.key().into(),
            self.key.repeat.to_string(),
            self.key.master_seed.to_string(),
            self.run_seed.to_string(),
            status,
            r.n_offline.to_string(),
            r.n_models.to_string(),
            r.true_evals.to_string(),
            format_float(r.surrogate_fitness),
            format_float(r.true_fitness),
            r.best_genome.iter().map(|&g| format_float(g)).collect::<Vec<_>>().join(" "),
        ]
    }

    /// The record's `runs.csv` line, newline included.
    pub fn csv_row(&self) -> String {
        csv_line(&self.csv_fields())
    }
}

fn csv_line<S: AsRef<[u8]>>(fields: &[S]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(fields).expect("writing to memory");
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("utf-8 fields")
}

/// A parsed `runs.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub key: RunKey,
    pub ok: bool,
    pub true_fitness: f64,
    pub raw: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunsFile {
    pub rows: Vec<RunRow>,
    /// `line N: reason` for rows that could not be used.
    pub rejected: Vec<String>,
}

fn parse_row(fields: &csv::StringRecord) -> std::result::Result<RunRow, String> {
    if fields.len() != RUNS_COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", RUNS_COLUMNS.len(), fields.len()));
    }
    let f = |i: usize| &fields[i];
    let bad = |i: usize| format!("bad {} {:?}", RUNS_COLUMNS[i], &fields[i]);
    let kind: ProblemKind = f(0).parse().map_err(|_| bad(0))?;
    let dim: usize = f(1).parse().map_err(|_| bad(1))?;
    let form = match f(2) {
        "canonical" => RosenbrockForm::Canonical,
        "unsquared" => RosenbrockForm::Unsquared,
        _ => return Err(bad(2)),
    };
    let problem = ProblemSpec::new(kind, dim).map_err(|_| bad(1))?.with_rosenbrock_form(form);
    let algorithm: SurrogateKind = f(3).parse().map_err(|_| bad(3))?;
    let repeat: usize = f(4).parse().map_err(|_| bad(4))?;
    let master_seed: u64 = f(5).parse().map_err(|_| bad(5))?;
    let ok = match f(7) {
        "ok" => true,
        s if s.starts_with("failed:") => false,
        _ => return Err(bad(7)),
    };
    let true_fitness: f64 = f(12).parse().map_err(|_| bad(12))?;
    if ok && !true_fitness.is_finite() {
        return Err(bad(12));
    }
    Ok(RunRow {
        key: RunKey { problem, algorithm, repeat, master_seed },
        ok,
        true_fitness,
        raw: fields.iter().map(String::from).collect(),
    })
}

/// Reads `runs.csv`. A missing file reads as empty; a wrong version line is
/// an error; malformed rows are rejected individually.
pub fn read_runs(path: &Path) -> Result<RunsFile> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(RunsFile::default()),
        Err(e) => return Err(e.into()),
    };
    let mut lines = text.lines();
    match lines.next() {
        None => return Ok(RunsFile::default()),
        Some(first) if first == RUNS_VERSION_LINE => {}
        Some(first) => {
            return Err(Error::Config(format!("{}:1: unsupported runs file header {first:?}", path.display())))
        }
    }
    let body = text.split_once('\n').map_or("", |(_, rest)| rest);
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(body.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(RUNS_COLUMNS) {
        return Err(Error::Config(format!("{}:2: unexpected column header", path.display())));
    }
    let mut out = RunsFile::default();
    let mut seen = BTreeSet::new();
    for rec in reader.records() {
        let (line, parsed) = match rec {
            Ok(r) => (r.position().map_or(0, |p| p.line() + 1), parse_row(&r)),
            Err(e) => (e.position().map_or(0, |p| p.line() + 1), Err(e.to_string())),
        };
        match parsed {
            Ok(row) if !seen.insert(row.key) => out.rejected.push(format!("line {line}: duplicate run")),
            Ok(row) => out.rows.push(row),
            Err(reason) => out.rejected.push(format!("line {line}: {reason}")),
        }
    }
    Ok(out)
}

/// Appends rows and writes per-run JSON; the only writer of a results
/// directory during a run.
struct ResultWriter {
    csv: fs::File,
    json_dir: PathBuf,
}

impl ResultWriter {
    fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join("runs"))?;
        let path = dir.join("runs.csv");
        let fresh = fs::metadata(&path).map_or(true, |m| m.len() == 0);
        let mut csv = OpenOptions::new().create(true).append(true).open(&path)?;
        if fresh {
            writeln!(csv, "{RUNS_VERSION_LINE}")?;
            csv.write_all(csv_line(&RUNS_COLUMNS).as_bytes())?;
        }
        Ok(Self { csv, json_dir: dir.join("runs") })
    }

    fn write(&mut self, record: &RunRecord) -> Result<()> {
        let json = serde_json::to_string_pretty(record)?;
        fs::write(self.json_dir.join(format!("{}.json", record.key.file_stem())), json)?;
        self.csv.write_all(record.csv_row().as_bytes())?;
        self.csv.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub executed: usize,
    pub skipped: usize,
    pub failed: Vec<RunKey>,
    pub report: Report,
}

/// Runs every missing run of the grid with up to `jobs` in parallel, then
/// writes the report. Runs already in `runs.csv` are skipped.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    jobs: usize,
    mut progress: impl FnMut(&RunRecord),
) -> Result<ExperimentOutcome> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), cfg.to_canonical_json())?;
    let done: BTreeSet<RunKey> = read_runs(&dir.join("runs.csv"))?.rows.into_iter().map(|r| r.key).collect();
    let tasks: Vec<RunKey> = cfg.tasks()?.into_iter().filter(|k| !done.contains(k)).collect();
    let skipped = cfg.tasks()?.len() - tasks.len();

    let mut writer = ResultWriter::open(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    let (tx, rx) = mpsc::channel::<Result<RunRecord>>();
    let mut executed = 0;
    let mut failed = Vec::new();
    let mut first_error = None;
    std::thread::scope(|s| {
        let pipeline = &cfg.pipeline;
        let tasks = &tasks;
        s.spawn(move || {
            pool.install(|| {
                tasks.par_iter().for_each_with(tx, |tx, &key| {
                    let _ = tx.send(single_run(pipeline, key));
                })
            })
        });
        for msg in rx {
            let written = msg.and_then(|record| {
                writer.write(&record)?;
                Ok(record)
            });
            match written {
                Ok(record) => {
                    executed += 1;
                    if !record.result.is_ok() {
                        failed.push(record.key);
                    }
                    progress(&record);
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = first_error {
        return Err(e);
    }
    let report = report(dir)?;
    Ok(ExperimentOutcome { executed, skipped, failed, report })
}

/// Summary and timing tables regenerated from a results directory.
#[derive(Debug, Clone)]
pub struct Report {
    pub summary: Summary,
    pub summary_text: String,
    pub timing_text: String,
    pub rejected: Vec<String>,
}

/// Rebuilds `summary.csv`, `summary.txt` and `timing.txt` from `runs.csv`
/// and `runs/*.json` without rerunning anything.
pub fn report(dir: &Path) -> Result<Report> {
    let runs = read_runs(&dir.join("runs.csv"))?;
    if runs.rows.is_empty() {
        return Err(Error::Config(format!("no runs found in {}", dir.display())));
    }
    let problems: BTreeSet<ProblemSpec> = runs.rows.iter().map(|r| r.key.problem).collect();
    let algorithms: BTreeSet<SurrogateKind> = runs.rows.iter().map(|r| r.key.algorithm).collect();
    let reference = *algorithms.iter().next().expect("nonempty");
    let observations: Vec<Observation> = runs
        .rows
        .iter()
        .map(|r| Observation {
            problem: problem_label(&r.key.problem),
            algorithm: r.key.algorithm.key().into(),
            // pairs runs of different algorithms; master seeds never mix in one table
            repeat: r.key.repeat,
            value: if r.ok { r.true_fitness } else { f64::NAN },
        })
        .collect();
    let masters: BTreeSet<u64> = runs.rows.iter().map(|r| r.key.master_seed).collect();
    if masters.len() > 1 {
        return Err(Error::Config(format!("{} mixes master seeds {masters:?}", dir.display())));
    }
    let problem_names: Vec<String> = problems.iter().map(problem_label).collect();
    let algorithm_names: Vec<String> = algorithms.iter().map(|a| a.key().to_string()).collect();
    let summary = summarize(&observations, &problem_names, &algorithm_names, reference.key())?;

    let mut summary_text = summary.to_text();
    if !runs.rejected.is_empty() {
        summary_text.push_str("\nrejected rows in runs.csv:\n");
        for r in &runs.rejected {
            summary_text.push_str(&format!("  {r}\n"));
        }
    }
    let timing_text = timing_report(dir, &runs.rows)?;
    fs::write(dir.join("summary.csv"), summary.to_csv()?)?;
    fs::write(dir.join("summary.txt"), &summary_text)?;
    fs::write(dir.join("timing.txt"), &timing_text)?;
    Ok(Report { summary, summary_text, timing_text, rejected: runs.rejected })
}

#[derive(Default)]
struct PhaseSums {
    n: usize,
    build: f64,
    evolve: f64,
    total: f64,
    models: usize,
}

fn timing_report(dir: &Path, rows: &[RunRow]) -> Result<String> {
    let mut sums: BTreeMap<(ProblemSpec, SurrogateKind), PhaseSums> = BTreeMap::new();
    let mut unreadable = Vec::new();
    for row in rows {
        let path = dir.join("runs").join(format!("{}.json", row.key.file_stem()));
        let record = fs::read_to_string(&path)
            .map_err(Error::from)
            .and_then(|t| Ok(serde_json::from_str::<RunRecord>(&t)?));
        match record {
            Ok(rec) if rec.key == row.key => {
                let s = sums.entry((row.key.problem, row.key.algorithm)).or_default();
                s.n += 1;
                s.build += rec.result.timings.build;
                s.evolve += rec.result.timings.evolve;
                s.total += rec.result.timings.total;
                s.models = rec.result.n_models;
            }
            _ => unreadable.push(path.display().to_string()),
        }
    }
    let mut out = format!(
        "{:<24} {:<14} {:>5} {:>7} {:>12} {:>12} {:>12}\n",
        "problem", "algorithm", "runs", "models", "build s", "evolve s", "total s"
    );
    for ((p, a), s) in &sums {
        let n = s.n as f64;
        out.push_str(&format!(
            "{:<24} {:<14} {:>5} {:>7} {:>12.4} {:>12.4} {:>12.4}\n",
            problem_label(p),
            a.key(),
            s.n,
            s.models,
            s.build / n,
            s.evolve / n,
            s.total / n
        ));
    }
    let mean_build = |p: &ProblemSpec, a: SurrogateKind| sums.get(&(*p, a)).map(|s| s.build / s.n as f64);
    let problems: BTreeSet<ProblemSpec> = sums.keys().map(|(p, _)| *p).collect();
    let mut ratios = String::new();
    for p in &problems {
        if let (Some(icn), Some(ens)) = (mean_build(p, SurrogateKind::Icn), mean_build(p, SurrogateKind::RbfnEnsemble)) {
            ratios.push_str(&format!("{:<24} {:.4}\n", problem_label(p), icn / ens));
        }
    }
    if !ratios.is_empty() {
        out.push_str("\nmean build time ratio, icn / rbfn-ensemble:\n");
        out.push_str(&ratios);
    }
    if !unreadable.is_empty() {
        out.push_str("\nmissing or unreadable run files:\n");
        for u in unreadable {
            out.push_str(&format!("  {u}\n"));
        }
    }
    Ok(out)
}

/// Settings for the knowledge comparison on Rosenbrock.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub dim: usize,
    pub seeds: Vec<u64>,
    pub icn: IcnConfig,
    pub strong_form: StrongForm,
    pub rosenbrock_form: RosenbrockForm,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            dim: 10,
            seeds: vec![0],
            icn: IcnConfig::default(),
            strong_form: StrongForm::Squared,
            rosenbrock_form: RosenbrockForm::Canonical,
        }
    }
}

pub const DEMO_VARIANTS: [&str; 3] = ["none", "weak", "strong"];

/// Per-iteration errors of one trained variant.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoCurve {
    pub variant: &'static str,
    pub seed: u64,
    /// Train and test RMSE of the parameters before each update.
    pub train: Vec<f64>,
    pub test: Vec<f64>,
    /// After the last update.
    pub final_train: f64,
    pub final_test: f64,
}

/// Trains the three variants on `11·dim` Latin hypercube points per seed,
/// `10·dim` for training and `dim` held out.
pub fn knowledge_demo(cfg: &DemoConfig) -> Result<Vec<DemoCurve>> {
    let d = cfg.dim;
    if d < 2 {
        return Err(Error::Config("the knowledge demo needs dim >= 2".into()));
    }
    let problem = ProblemSpec::new(ProblemKind::Rosenbrock, d)?.with_rosenbrock_form(cfg.rosenbrock_form);
    let variants = [
        (DEMO_VARIANTS[0], Vec::new()),
        (DEMO_VARIANTS[1], weak_rosenbrock_terms(d)?),
        (DEMO_VARIANTS[2], strong_rosenbrock_terms(d, cfg.strong_form)?),
    ];
    let mut curves = Vec::new();
    for &seed in &cfg.seeds {
        let all = Dataset::from_problem(&problem, lhs(11 * d, d, derive_seed(seed, 0))?.points)?;
        let (train, test) = all.split_at(10 * d)?;
        let icn = IcnConfig { seed: derive_seed(seed, 1), ..cfg.icn.clone() };
        for (name, terms) in &variants {
            let mut tr = Vec::with_capacity(icn.iterations);
            let mut te = Vec::with_capacity(icn.iterations);
            let mut monitor_err = None;
            let out = train_augmented_monitored(&train, &icn, terms, |_, model| {
                match (model.rmse(&train), model.rmse(&test)) {
                    (Ok(a), Ok(b)) => {
                        tr.push(a);
                        te.push(b);
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        monitor_err.get_or_insert(e);
                    }
                }
            })?;
            if let Some(e) = monitor_err {
                return Err(e);
            }
            curves.push(DemoCurve {
                variant: name,
                seed,
                train: tr,
                test: te,
                final_train: out.model.rmse(&train)?,
                final_test: out.model.rmse(&test)?,
            });
        }
    }
    Ok(curves)
}

/// Writes `loss_<variant>.csv` (seed, iteration, train_rmse, test_rmse) and
/// `knowledge_summary.txt`; returns the summary text.
pub fn write_demo(dir: &Path, curves: &[DemoCurve]) -> Result<String> {
    fs::create_dir_all(dir)?;
    for variant in DEMO_VARIANTS {
        let mut w = csv::Writer::from_path(dir.join(format!("loss_{variant}.csv")))?;
        w.write_record(["seed", "iteration", "train_rmse", "test_rmse"])?;
        for c in curves.iter().filter(|c| c.variant == variant) {
            for (i, (a, b)) in c.train.iter().zip(&c.test).enumerate() {
                w.write_record([c.seed.to_string(), i.to_string(), format_float(*a), format_float(*b)])?;
            }
        }
        w.flush()?;
    }
    let mut text = format!("{:<8} {:>6} {:>18} {:>18}\n", "variant", "seeds", "median train rmse", "median test rmse");
    for variant in DEMO_VARIANTS {
        let pick = |f: fn(&DemoCurve) -> f64| {
            median(&curves.iter().filter(|c| c.variant == variant).map(f).collect::<Vec<_>>())
        };
        let n = curves.iter().filter(|c| c.variant == variant).count();
        text.push_str(&format!(
            "{variant:<8} {n:>6} {:>18.6} {:>18.6}\n",
            pick(|c| c.final_train),
            pick(|c| c.final_test)
        ));
    }
    fs::write(dir.join("knowledge_summary.txt"), &text)?;
    Ok(text)
}

/// Median of a nonempty slice; NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}
