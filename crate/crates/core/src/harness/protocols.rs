//! Baselines and the experiment protocols built on training + evaluation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use log::info;

use super::config::{check_split, ExperimentConfig};
use super::output::{write_jsonl, write_summary_csv};
use super::run::{evaluate_policy, sort_records, summarize, Policy, RunRecord, SummaryRow};
use super::train::{train, untrained_params, TrainOutcome};
use super::HarnessError;
use crate::dqn::Checkpoint;
use crate::env::{ActionScheme, RewardVariant};

/// Method label of the trained policy.
pub const TRAINED: &str = "rleceo";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    /// Fixed level; `None` takes the config's `static_level`.
    StaticEps(Option<f64>),
    /// Decay exponent; `None` takes the config's `cp`.
    ScheduledEps(Option<f64>),
    FeasibilityRule,
    UntrainedAgent,
}

const BASELINE_NAMES: &str =
    "static-eps, static-eps(<a>), scheduled-eps, scheduled-eps(<cp>), feasibility-rule, untrained-agent";

impl FromStr for Baseline {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || HarnessError::Config(format!("unknown baseline `{s}`; valid: {BASELINE_NAMES}"));
        let arg = |prefix: &str| -> Result<Option<f64>, HarnessError> {
            let inner = s
                .strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(unknown)?;
            inner.trim().parse().map(Some).map_err(|_| unknown())
        };
        match s {
            "static-eps" => Ok(Baseline::StaticEps(None)),
            "scheduled-eps" => Ok(Baseline::ScheduledEps(None)),
            "feasibility-rule" => Ok(Baseline::FeasibilityRule),
            "untrained-agent" => Ok(Baseline::UntrainedAgent),
            _ if s.starts_with("static-eps(") => Ok(Baseline::StaticEps(arg("static-eps")?)),
            _ if s.starts_with("scheduled-eps(") => Ok(Baseline::ScheduledEps(arg("scheduled-eps")?)),
            _ => Err(unknown()),
        }
    }
}

impl Baseline {
    /// Resolves defaults from `cfg` and validates parameters.
    pub fn resolve(self, cfg: &ExperimentConfig) -> Result<(String, Policy), HarnessError> {
        match self {
            Baseline::StaticEps(a) => {
                let a = a.unwrap_or(cfg.static_level);
                if !(0.0..=1.0).contains(&a) {
                    return Err(HarnessError::Config(format!("static level {a} outside [0, 1]")));
                }
                Ok((format!("static-eps({a})"), Policy::Static(a)))
            }
            Baseline::ScheduledEps(cp) => {
                let cp = cp.unwrap_or(cfg.cp);
                if !(cp > 0.0 && cp.is_finite()) {
                    return Err(HarnessError::Config(format!("cp {cp} must be positive")));
                }
                Ok((format!("scheduled-eps({cp})"), Policy::Scheduled(cp)))
            }
            Baseline::FeasibilityRule => Ok(("feasibility-rule".into(), Policy::FeasibilityRule)),
            Baseline::UntrainedAgent => Ok((
                "untrained-agent".into(),
                Policy::Agent {
                    params: Arc::new(untrained_params(cfg)?),
                    mask: cfg.mask_state,
                },
            )),
        }
    }
}

pub fn run_baseline(
    cfg: &ExperimentConfig,
    baseline: Baseline,
    problems: &[String],
) -> Result<Vec<RunRecord>, HarnessError> {
    cfg.validate()?;
    let (method, policy) = baseline.resolve(cfg)?;
    info!("running baseline {method}");
    evaluate_policy(cfg, problems, &method, &policy, &BTreeMap::new())
}

/// Greedy evaluation of a trained checkpoint. The checkpoint's action
/// scheme and reward variant must match the config.
pub fn evaluate_checkpoint(
    cfg: &ExperimentConfig,
    ckpt: &Checkpoint,
    problems: &[String],
    method: &str,
) -> Result<Vec<RunRecord>, HarnessError> {
    cfg.validate()?;
    ckpt.expect_scheme(cfg.action_scheme)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    if ckpt.meta.reward != cfg.reward {
        return Err(HarnessError::Config(format!(
            "checkpoint was trained with reward `{}`, config asks for `{}`",
            ckpt.meta.reward, cfg.reward
        )));
    }
    let policy = Policy::Agent {
        params: Arc::new(ckpt.params.clone()),
        mask: cfg.mask_state,
    };
    evaluate_policy(cfg, problems, method, &policy, &ckpt.meta.f_agentbest)
}

/// Evaluation records plus every training run that produced them.
#[derive(Debug, Clone, Default)]
pub struct ProtocolOutput {
    pub records: Vec<RunRecord>,
    pub trained: Vec<(String, TrainOutcome)>,
}

fn file_label(name: &str) -> String {
    name.replace(['/', '@'], "_")
}

impl ProtocolOutput {
    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.records)
    }

    /// Writes `summary.csv`, `runs.jsonl`, and for each training run
    /// `<label>.ckpt` and `<label>.train.jsonl`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        let mut paths = Vec::new();
        let summary = dir.join("summary.csv");
        write_summary_csv(&summary, &self.summary())?;
        paths.push(summary);
        let runs = dir.join("runs.jsonl");
        write_jsonl(&runs, &self.records)?;
        paths.push(runs);
        for (label, out) in &self.trained {
            let label = file_label(label);
            let log = dir.join(format!("{label}.train.jsonl"));
            write_jsonl(&log, &out.log)?;
            paths.push(log);
            let ckpt = dir.join(format!("{label}.ckpt"));
            std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
            out.checkpoint.save(&ckpt)?;
            paths.push(ckpt);
        }
        Ok(paths)
    }
}

fn assert_unseen(out: &TrainOutcome, test: &[String]) -> Result<(), HarnessError> {
    if let Some(e) = out.log.iter().find(|e| test.contains(&e.problem)) {
        return Err(HarnessError::Protocol(format!(
            "test problem `{}` appeared in training (epoch {})",
            e.problem, e.epoch
        )));
    }
    Ok(())
}

/// Trains on all problems but one and evaluates on the one left out, for
/// every problem in `cfg.problems`.
pub fn leave_one_out(cfg: &ExperimentConfig) -> Result<ProtocolOutput, HarnessError> {
    if cfg.problems.len() < 2 {
        return Err(HarnessError::Config(
            "leave-one-out needs at least two problems".into(),
        ));
    }
    cfg.validate()?;
    let mut output = ProtocolOutput::default();
    for held_out in &cfg.problems {
        let train_set: Vec<String> = cfg.problems.iter().filter(|p| *p != held_out).cloned().collect();
        info!("leave-one-out: holding out {held_out}");
        let test = [held_out.clone()];
        let out = train(cfg, &train_set)?;
        assert_unseen(&out, &test)?;
        output
            .records
            .extend(evaluate_checkpoint(cfg, &out.checkpoint, &test, TRAINED)?);
        output.trained.push((format!("loo-{held_out}"), out));
    }
    sort_records(&mut output.records);
    Ok(output)
}

/// One training run on `train_set`, evaluated on the disjoint `test_set`.
pub fn split_protocol(
    cfg: &ExperimentConfig,
    train_set: &[String],
    test_set: &[String],
) -> Result<ProtocolOutput, HarnessError> {
    check_split(train_set, test_set)?;
    cfg.validate()?;
    let out = train(cfg, train_set)?;
    assert_unseen(&out, test_set)?;
    let records = evaluate_checkpoint(cfg, &out.checkpoint, test_set, TRAINED)?;
    Ok(ProtocolOutput {
        records,
        trained: vec![("split".into(), out)],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    NoState,
    Aa,
    Ca,
    R1,
    R2,
    R1r2,
    NoTrain,
}

impl Ablation {
    pub const ALL: [Ablation; 7] = [
        Ablation::NoState,
        Ablation::Aa,
        Ablation::Ca,
        Ablation::R1,
        Ablation::R2,
        Ablation::R1r2,
        Ablation::NoTrain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::NoState => "no-state",
            Ablation::Aa => "aa",
            Ablation::Ca => "ca",
            Ablation::R1 => "r1",
            Ablation::R2 => "r2",
            Ablation::R1r2 => "r1r2",
            Ablation::NoTrain => "no-train",
        }
    }

    pub fn method(self) -> String {
        format!("{TRAINED}-{}", self.as_str())
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Ablation::ALL.iter().map(|a| a.as_str()).collect();
                HarnessError::Config(format!(
                    "unknown ablation `{s}`; valid: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Trains the full method and the variant on the split's training list and
/// compares them on its test list with shared run seeds.
pub fn ablate(cfg: &ExperimentConfig, variant: Ablation) -> Result<ProtocolOutput, HarnessError> {
    let (train_set, test_set) = cfg.split_lists()?;
    let full_cfg = ExperimentConfig {
        mask_state: false,
        ..cfg.clone()
    };
    let mut output = split_protocol(&full_cfg, train_set, test_set)?;
    output.trained[0].0 = TRAINED.into();
    let method = variant.method();
    let variant_cfg = |scheme: Option<ActionScheme>, reward: Option<RewardVariant>| ExperimentConfig {
        action_scheme: scheme.unwrap_or(full_cfg.action_scheme),
        reward: reward.unwrap_or(full_cfg.reward),
        ..full_cfg.clone()
    };
    let retrain = |vcfg: ExperimentConfig, output: &mut ProtocolOutput| -> Result<(), HarnessError> {
        let out = train(&vcfg, train_set)?;
        assert_unseen(&out, test_set)?;
        output
            .records
            .extend(evaluate_checkpoint(&vcfg, &out.checkpoint, test_set, &method)?);
        output.trained.push((method.clone(), out));
        Ok(())
    };
    match variant {
        Ablation::NoState => {
            let masked = ExperimentConfig {
                mask_state: true,
                ..full_cfg.clone()
            };
            let ckpt = &output.trained[0].1.checkpoint;
            let recs = evaluate_checkpoint(&masked, ckpt, test_set, &method)?;
            output.records.extend(recs);
        }
        Ablation::Aa => retrain(variant_cfg(Some(ActionScheme::Aggressive), None), &mut output)?,
        Ablation::Ca => retrain(variant_cfg(Some(ActionScheme::Conservative), None), &mut output)?,
        Ablation::R1 => retrain(variant_cfg(None, Some(RewardVariant::R1)), &mut output)?,
        Ablation::R2 => retrain(variant_cfg(None, Some(RewardVariant::R2)), &mut output)?,
        Ablation::R1r2 => retrain(variant_cfg(None, Some(RewardVariant::R1r2)), &mut output)?,
        Ablation::NoTrain => {
            let policy = Policy::Agent {
                params: Arc::new(untrained_params(&full_cfg)?),
                mask: false,
            };
            let recs = evaluate_policy(&full_cfg, test_set, &method, &policy, &BTreeMap::new())?;
            output.records.extend(recs);
        }
    }
    sort_records(&mut output.records);
    Ok(output)
}
