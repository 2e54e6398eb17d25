//! Command-line front end for training, evaluation and the experiment
//! protocols.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for failures
//! while running.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use rleceo::dqn::Checkpoint;
use rleceo::harness::{
    self, export_curves, read_jsonl, summarize, Ablation, Baseline, ExperimentConfig,
    HarnessError, ProtocolOutput, RunRecord,
};

#[derive(Debug, Parser)]
#[command(name = "rleceo", version, about = "Learned epsilon-relaxation control for L-SHADE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment config; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Independent runs per problem and dimension.
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated dimensions, e.g. `10,30`.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an agent on the configured problems.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint greedily on the configured problems.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a baseline: static-eps[(a)], scheduled-eps[(cp)], feasibility-rule, untrained-agent.
    Baseline {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-out over the configured problems.
    Loo {
        #[command(flatten)]
        common: Common,
    },
    /// Train on one list, test on a disjoint one.
    Split {
        /// Comma-separated training problems (overrides `train_problems`).
        #[arg(long, value_delimiter = ',')]
        train: Option<Vec<String>>,
        /// Comma-separated test problems (overrides `test_problems`).
        #[arg(long, value_delimiter = ',')]
        test: Option<Vec<String>>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the full method with one variant: no-state, aa, ca, r1, r2, r1r2, no-train.
    Ablate {
        variant: String,
        #[command(flatten)]
        common: Common,
    },
    /// Turn run records (`runs.jsonl`) into per-generation and normalized curve files.
    ExportCurves {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(runs) = common.runs {
        cfg.runs = runs;
    }
    if let Some(dims) = &common.dims {
        cfg.dims = dims.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_records(cfg: &ExperimentConfig, records: Vec<RunRecord>) -> Result<(), HarnessError> {
    let out = ProtocolOutput {
        records,
        trained: Vec::new(),
    };
    report(cfg, &out)
}

fn report(cfg: &ExperimentConfig, out: &ProtocolOutput) -> Result<(), HarnessError> {
    for path in out.write(&cfg.out_dir)? {
        info!("wrote {}", path.display());
    }
    for row in out.summary() {
        println!(
            "{:<32} D={:<4} {:<24} {:.6e} ± {:.3e}",
            row.problem, row.dim, row.method, row.mean, row.std
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { common } => {
            let cfg = load_config(&common)?;
            let out = harness::train(&cfg, &cfg.problems)?;
            let ckpt = cfg.out_dir.join("checkpoint.ckpt");
            std::fs::create_dir_all(&cfg.out_dir).map_err(|source| HarnessError::Io {
                path: cfg.out_dir.clone(),
                source,
            })?;
            out.checkpoint.save(&ckpt)?;
            harness::write_jsonl(&cfg.out_dir.join("train.jsonl"), &out.log)?;
            println!(
                "trained {} episodes ({} gradient steps) -> {}",
                out.log.len(),
                out.grad_steps,
                ckpt.display()
            );
        }
        Command::Evaluate { checkpoint, common } => {
            let cfg = load_config(&common)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let records = harness::evaluate_checkpoint(&cfg, &ckpt, &cfg.problems, harness::TRAINED)?;
            write_records(&cfg, records)?;
        }
        Command::Baseline { name, common } => {
            let cfg = load_config(&common)?;
            let baseline: Baseline = name.parse()?;
            let records = harness::run_baseline(&cfg, baseline, &cfg.problems)?;
            write_records(&cfg, records)?;
        }
        Command::Loo { common } => {
            let cfg = load_config(&common)?;
            report(&cfg, &harness::leave_one_out(&cfg)?)?;
        }
        Command::Split {
            train,
            test,
            common,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(t) = train {
                cfg.train_problems = t;
            }
            if let Some(t) = test {
                cfg.test_problems = t;
            }
            cfg.validate()?;
            let (tr, te) = cfg.split_lists()?;
            report(&cfg, &harness::split_protocol(&cfg, tr, te)?)?;
        }
        Command::Ablate { variant, common } => {
            let cfg = load_config(&common)?;
            let variant: Ablation = variant.parse()?;
            report(&cfg, &harness::ablate(&cfg, variant)?)?;
        }
        Command::ExportCurves { inputs, common } => {
            let out_dir = common.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            let mut records: Vec<RunRecord> = Vec::new();
            for path in &inputs {
                records.extend(read_jsonl::<RunRecord>(path)?);
            }
            let (jsonl, csv) = export_curves(&records, &out_dir)?;
            println!(
                "{} runs in {} groups -> {}, {}",
                records.len(),
                summarize(&records).len(),
                jsonl.display(),
                csv.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
