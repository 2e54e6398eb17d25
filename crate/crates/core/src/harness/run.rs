//! Single evaluation episodes under a fixed policy, and their summaries.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::cop::{EpsilonVector, ProblemRef};
use crate::dqn::{argmax, NetworkParams};
use crate::env::{epsilon_from_action, EnvConfig, EpsilonBase, MetaEnv, StepTrace};
use crate::features::{mask_constraint_features, StateVector};
use crate::seed;

/// How thresholds are chosen during an evaluation episode.
#[derive(Debug, Clone)]
pub enum Policy {
    /// Greedy action from a value network; `mask` zeroes the constraint
    /// features before each query.
    Agent {
        params: Arc<NetworkParams>,
        mask: bool,
    },
    /// The exponential mapping held at one level for the whole run.
    Static(f64),
    /// `ε_base (1 - fes/maxfes)^cp`.
    Scheduled(f64),
    /// No relaxation at all.
    FeasibilityRule,
}

/// `base_i (1 - fes/maxfes)^cp` for every constraint.
pub fn scheduled_epsilon(base: &EpsilonBase, fes: u64, maxfes: u64, cp: f64) -> EpsilonVector {
    let factor = scheduled_factor(fes, maxfes, cp);
    EpsilonVector::new(base.base().iter().map(|b| b * factor).collect())
        .expect("scaled base is finite and non-negative")
}

fn scheduled_factor(fes: u64, maxfes: u64, cp: f64) -> f64 {
    let frac = (fes as f64 / maxfes as f64).clamp(0.0, 1.0);
    (1.0 - frac).powf(cp)
}

/// Key under which per-problem bests are stored.
pub fn instance_key(name: &str, dim: usize) -> String {
    format!("{name}@{dim}")
}

/// Initialization seed of evaluation run `run`; shared by every method.
pub fn run_seed(base: u64, name: &str, dim: usize, run: usize) -> u64 {
    seed::derive(base, &format!("eval/{name}"), &[dim as u64, run as u64])
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub final_sco: f64,
    pub fes: u64,
    pub trace: Vec<StepTrace>,
    /// States the policy was shown, after any masking.
    pub observed: Vec<StateVector>,
}

pub fn run_episode(
    problem: ProblemRef,
    env_cfg: EnvConfig,
    seed: u64,
    policy: &Policy,
    f_agentbest: f64,
) -> Result<Episode, crate::env::EnvError> {
    let maxfes = env_cfg.maxfes;
    let mut env = MetaEnv::reset(problem, seed, env_cfg, f_agentbest)?;
    let mut trace = Vec::new();
    let mut observed = Vec::new();
    while !env.is_terminal() {
        let outcome = match policy {
            Policy::Agent { params, mask } => {
                let s = if *mask {
                    mask_constraint_features(env.state())
                } else {
                    env.state()
                };
                observed.push(s);
                let q = params
                    .forward(s.as_slice())
                    .expect("state features are finite and sized");
                env.step(argmax(&q))?.1
            }
            Policy::Static(level) => {
                observed.push(env.state());
                let eps = epsilon_from_action(*level, env.epsilon_base());
                env.step_with_epsilon(eps, *level)?
            }
            Policy::Scheduled(cp) => {
                observed.push(env.state());
                let eps = scheduled_epsilon(env.epsilon_base(), env.fes(), maxfes, *cp);
                let level = scheduled_factor(env.fes(), maxfes, *cp);
                env.step_with_epsilon(eps, level)?
            }
            Policy::FeasibilityRule => {
                observed.push(env.state());
                let eps = EpsilonVector::zeros(env.problem().n_constraints());
                env.step_with_epsilon(eps, 0.0)?
            }
        };
        trace.push(outcome.trace);
    }
    Ok(Episode {
        final_sco: env.best_sco(),
        fes: env.fes(),
        trace,
        observed,
    })
}

/// One evaluation run, as persisted to JSON lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub dim: usize,
    pub method: String,
    pub run: usize,
    pub seed: u64,
    pub final_sco: f64,
    pub generations: Vec<StepTrace>,
}

/// Runs `policy` for `cfg.runs` paired seeds on every (problem, dim).
/// Output is sorted, so it does not depend on scheduling.
pub fn evaluate_policy(
    cfg: &ExperimentConfig,
    problems: &[String],
    method: &str,
    policy: &Policy,
    f_agentbest: &BTreeMap<String, f64>,
) -> Result<Vec<RunRecord>, HarnessError> {
    let registry = cfg.registry()?;
    let mut jobs = Vec::new();
    for name in problems {
        for &dim in &cfg.dims {
            let problem = registry.lookup(name, dim)?;
            for run in 0..cfg.runs {
                jobs.push((name.clone(), dim, run, problem.clone()));
            }
        }
    }
    let one = |(name, dim, run, problem): &(String, usize, usize, ProblemRef)| {
        let seed = run_seed(cfg.seed, name, *dim, *run);
        let best = f_agentbest
            .get(&instance_key(name, *dim))
            .copied()
            .unwrap_or(f64::INFINITY);
        let ep = run_episode(problem.clone(), cfg.env_config(*dim), seed, policy, best).map_err(
            |source| HarnessError::Env {
                context: format!("evaluating {method} on {name} (D = {dim}, run {run})"),
                source,
            },
        )?;
        debug_assert_eq!(ep.fes, cfg.maxfes(*dim));
        Ok(RunRecord {
            problem: name.clone(),
            dim: *dim,
            method: method.to_string(),
            run: *run,
            seed,
            final_sco: ep.final_sco,
            generations: ep.trace,
        })
    };
    let mut records: Vec<RunRecord> = if cfg.parallel {
        jobs.par_iter().map(one).collect::<Result<_, HarnessError>>()?
    } else {
        jobs.iter().map(one).collect::<Result<_, HarnessError>>()?
    };
    sort_records(&mut records);
    Ok(records)
}

pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| {
        (&a.problem, a.dim, &a.method, a.run).cmp(&(&b.problem, b.dim, &b.method, b.run))
    });
}

/// One table row: final SCO statistics over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    pub dim: usize,
    pub method: String,
    pub mean: f64,
    /// Population standard deviation; 0 for a single run.
    pub std: f64,
    pub min: f64,
    pub runs: usize,
}

pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, usize, &str), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((&r.problem, r.dim, &r.method))
            .or_default()
            .push(r.final_sco);
    }
    groups
        .into_iter()
        .map(|((problem, dim, method), v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            SummaryRow {
                problem: problem.to_string(),
                dim,
                method: method.to_string(),
                mean,
                std,
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                runs: v.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::registry_lookup;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            problems: vec!["sphere".into()],
            runs: 2,
            pop_size: 10,
            maxfes_per_dim: 10,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn scheduled_examples() {
        let base = EpsilonBase::new(vec![8.0, 0.4], 1e-3).unwrap();
        let half = scheduled_epsilon(&base, 50, 100, 2.0);
        assert_eq!(half.as_slice(), &[2.0, 0.1]);
        let end = scheduled_epsilon(&base, 100, 100, 5.0);
        assert_eq!(end.as_slice(), &[0.0, 0.0]);
        let start = scheduled_epsilon(&base, 0, 100, 5.0);
        assert_eq!(start.as_slice(), base.base());
    }

    #[test]
    fn feasibility_rule_matches_static_on_unconstrained_problem() {
        let p = registry_lookup("sphere", 10).unwrap();
        let cfg = small_cfg();
        let a = run_episode(p.clone(), cfg.env_config(10), 9, &Policy::FeasibilityRule, f64::INFINITY)
            .unwrap();
        let b = run_episode(p, cfg.env_config(10), 9, &Policy::Static(0.7), f64::INFINITY).unwrap();
        assert_eq!(a.final_sco, b.final_sco);
        let scos = |e: &Episode| e.trace.iter().map(|t| t.sco).collect::<Vec<_>>();
        assert_eq!(scos(&a), scos(&b));
    }

    #[test]
    fn unconstrained_sco_is_the_objective_best() {
        let p = registry_lookup("sphere", 10).unwrap();
        let cfg = small_cfg();
        let ep = run_episode(p, cfg.env_config(10), 1, &Policy::Static(0.2), f64::INFINITY).unwrap();
        assert_eq!(ep.fes, 100);
        let fes: Vec<u64> = ep.trace.iter().map(|t| t.fes).collect();
        assert!(fes.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(ep.final_sco, ep.trace.last().unwrap().sco);
        assert!(ep.final_sco >= 0.0);
    }

    #[test]
    fn single_run_has_zero_std_and_reruns_match() {
        let mut cfg = small_cfg();
        cfg.runs = 1;
        let recs = evaluate_policy(&cfg, &cfg.problems.clone(), "static", &Policy::Static(0.5), &BTreeMap::new())
            .unwrap();
        let rows = summarize(&recs);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].std, 0.0);
        assert_eq!(rows[0].runs, 1);
        cfg.parallel = false;
        let again = evaluate_policy(&cfg, &cfg.problems.clone(), "static", &Policy::Static(0.5), &BTreeMap::new())
            .unwrap();
        assert_eq!(recs, again);
    }

    #[test]
    fn masked_agent_sees_zeroed_constraint_features() {
        let p = registry_lookup("cec12", 10).unwrap();
        let cfg = ExperimentConfig {
            pop_size: 20,
            ..ExperimentConfig::default()
        };
        let mut rng = seed::rng(0);
        let params = NetworkParams::glorot(crate::dqn::Shape::new(10, 64, 11), &mut rng);
        let policy = Policy::Agent {
            params: Arc::new(params),
            mask: true,
        };
        let ep = run_episode(p, cfg.env_config(10), 3, &policy, f64::INFINITY).unwrap();
        assert!(!ep.observed.is_empty());
        for s in &ep.observed {
            for i in crate::features::CONSTRAINT_FEATURES {
                assert_eq!(s.0[i], 0.0);
            }
        }
    }

    #[test]
    fn summary_statistics() {
        let rec = |run, sco| RunRecord {
            problem: "p".into(),
            dim: 10,
            method: "m".into(),
            run,
            seed: 0,
            final_sco: sco,
            generations: vec![],
        };
        let rows = summarize(&[rec(0, 1.0), rec(1, 3.0)]);
        assert_eq!(rows[0].mean, 2.0);
        assert_eq!(rows[0].std, 1.0);
        assert_eq!(rows[0].min, 1.0);
        assert_eq!(rows[0].runs, 2);
    }
}
