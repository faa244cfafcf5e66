use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use icn_saea::experiment::{self, DemoConfig, ExperimentConfig, RunKey};
use icn_saea::knowledge::StrongForm;
use icn_saea::pipeline::{PipelineConfig, SurrogateKind};
use icn_saea::{IcnConfig, ProblemKind, ProblemSpec, RosenbrockForm};

/// Offline surrogate-assisted optimization with an interpretable
/// convolutional surrogate.
#[derive(Parser)]
#[command(name = "icn-saea", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) an experiment grid and write its summary.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Results directory; overrides `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Master seed; overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train without, with weak and with strong knowledge on Rosenbrock.
    KnowledgeDemo {
        /// ICN settings (JSON); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "knowledge-demo")]
        out: PathBuf,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        /// Count zero-padded pixels in the reported errors.
        #[arg(long)]
        no_mask: bool,
        /// Use the unsquared difference sum as strong knowledge.
        #[arg(long)]
        literal: bool,
    },
    /// Regenerate the summary and timing report of a results directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute one run of a grid and print its runs.csv row.
    SingleRun {
        /// Experiment config; only its pipeline settings and seed are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        problem: ProblemKind,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        algorithm: SurrogateKind,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        /// Master seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        unsquared: bool,
        /// Print the full run record as JSON instead of the row.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { config, out, jobs, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let total = cfg.tasks()?.len();
            let mut done = 0;
            let outcome = experiment::run_experiment(&cfg, jobs, |rec| {
                done += 1;
                let r = &rec.result;
                let status = if r.is_ok() { "ok".to_string() } else { format!("{:?}", r.status) };
                eprintln!(
                    "[{done}] {} {} r{}: true fitness {:.6e} ({status})",
                    experiment::problem_label(&rec.key.problem),
                    rec.key.algorithm,
                    rec.key.repeat,
                    r.true_fitness
                );
            })?;
            eprintln!(
                "{} of {total} runs executed, {} already present, {} failed",
                outcome.executed,
                outcome.skipped,
                outcome.failed.len()
            );
            print!("{}", outcome.report.summary_text);
            Ok(ExitCode::SUCCESS)
        }
        Command::KnowledgeDemo { config, out, seed, seeds, dim, no_mask, literal } => {
            let mut icn = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str::<IcnConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                None => IcnConfig::default(),
            };
            if no_mask {
                icn.mask_padding = false;
            }
            if seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            let cfg = DemoConfig {
                dim,
                seeds: (seed..seed + seeds).collect(),
                icn,
                strong_form: if literal { StrongForm::Literal } else { StrongForm::Squared },
                rosenbrock_form: RosenbrockForm::Canonical,
            };
            let curves = experiment::knowledge_demo(&cfg)?;
            print!("{}", experiment::write_demo(&out, &curves)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { out } => {
            let report = experiment::report(&out)?;
            for r in &report.rejected {
                eprintln!("rejected {r}");
            }
            print!("{}\n{}", report.summary_text, report.timing_text);
            Ok(ExitCode::SUCCESS)
        }
        Command::SingleRun { config, problem, dim, algorithm, repeat, seed, unsquared, json } => {
            let (pipeline, config_seed) = match config {
                Some(path) => {
                    let cfg = ExperimentConfig::load(&path)?;
                    (cfg.pipeline, cfg.seed)
                }
                None => (PipelineConfig::default(), 0),
            };
            let form = if unsquared { RosenbrockForm::Unsquared } else { RosenbrockForm::Canonical };
            let key = RunKey {
                problem: ProblemSpec::new(problem, dim)?.with_rosenbrock_form(form),
                algorithm,
                repeat,
                master_seed: seed.unwrap_or(config_seed),
            };
            let record = experiment::single_run(&pipeline, key)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&record)?);
            } else {
                print!("{}", record.csv_row());
            }
            Ok(if record.result.is_ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
