//! The training loop: for each epoch, one episode per training problem,
//! with a replay insert and a gradient update after every step.

use std::collections::BTreeMap;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::instance_key;
use super::HarnessError;
use crate::cop::ProblemRef;
use crate::dqn::{
    cosine_lr, explore_rate, problem_set_hash, Checkpoint, CheckpointMeta, DqnAgent, NetworkParams,
};
use crate::env::MetaEnv;
use crate::seed;

/// One training episode, as persisted to JSON lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub epoch: usize,
    pub problem: String,
    pub dim: usize,
    pub seed: u64,
    pub steps: usize,
    pub fes: u64,
    pub final_sco: f64,
    pub episode_return: f64,
    pub f_agentbest: f64,
    pub lr: f64,
    /// Mean minibatch loss over the episode's gradient steps, if any.
    pub mean_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Parameters before the first gradient step.
    pub initial: NetworkParams,
    pub log: Vec<EpisodeLog>,
    pub grad_steps: u64,
}

fn agent_init_seed(cfg: &ExperimentConfig) -> u64 {
    seed::derive(cfg.seed, "agent-init", &[])
}

/// A freshly initialized agent, identical to the one training starts from.
pub fn untrained_params(cfg: &ExperimentConfig) -> Result<NetworkParams, HarnessError> {
    let mut rng = seed::rng(agent_init_seed(cfg));
    let agent = DqnAgent::new(cfg.action_scheme.n_actions(), cfg.train.clone(), &mut rng)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(agent.online)
}

/// Meta-steps in one episode: the initial population uses `N` evaluations
/// and every generation at most `N` more.
pub fn steps_per_episode(maxfes: u64, pop_size: usize) -> usize {
    let n = pop_size as u64;
    maxfes.saturating_sub(n).div_ceil(n) as usize
}

pub fn train(cfg: &ExperimentConfig, problems: &[String]) -> Result<TrainOutcome, HarnessError> {
    if problems.is_empty() {
        return Err(HarnessError::Config("training problem list is empty".into()));
    }
    cfg.validate()?;
    let registry = cfg.registry()?;
    let mut instances: Vec<(String, usize, ProblemRef)> = Vec::new();
    for name in problems {
        for &dim in &cfg.dims {
            instances.push((name.clone(), dim, registry.lookup(name, dim)?));
        }
    }

    let mut init_rng = seed::rng(agent_init_seed(cfg));
    let mut agent = DqnAgent::new(cfg.action_scheme.n_actions(), cfg.train.clone(), &mut init_rng)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let initial = agent.online.clone();
    let mut rng = seed::rng(seed::derive(cfg.seed, "agent", &[]));

    let per_epoch: usize = instances
        .iter()
        .map(|(_, dim, _)| steps_per_episode(cfg.maxfes(*dim), cfg.pop_size))
        .sum();
    let total_steps = per_epoch * cfg.train.max_epoch;
    let mut f_agentbest: BTreeMap<String, f64> = BTreeMap::new();
    let mut log = Vec::new();
    let mut global_step = 0usize;

    for epoch in 0..cfg.train.max_epoch {
        let lr = cosine_lr(epoch, &cfg.train);
        for (name, dim, problem) in &instances {
            let key = instance_key(name, *dim);
            let ep_seed = seed::derive(cfg.seed, &format!("train/{name}"), &[*dim as u64, epoch as u64]);
            let best = f_agentbest.get(&key).copied().unwrap_or(f64::INFINITY);
            let context = |step: usize| format!("training epoch {epoch}, problem {name} (D = {dim}), step {step}");
            let mut env = MetaEnv::reset(problem.clone(), ep_seed, cfg.env_config(*dim), best)
                .map_err(|source| HarnessError::Env {
                    context: context(0),
                    source,
                })?;
            let mut ret = 0.0;
            let mut losses = Vec::new();
            while !env.is_terminal() {
                let step = env.steps() + 1;
                let explore = explore_rate(global_step, total_steps, &cfg.train);
                let a = agent
                    .act(&env.state(), explore, &mut rng)
                    .map_err(|source| HarnessError::Agent {
                        context: context(step),
                        source,
                    })?;
                let (tr, outcome) = env.step(a).map_err(|source| HarnessError::Env {
                    context: context(step),
                    source,
                })?;
                ret += outcome.reward.r;
                agent.remember(tr);
                if let Some(loss) = agent.learn(lr, &mut rng).map_err(|source| HarnessError::Agent {
                    context: context(step),
                    source,
                })? {
                    losses.push(loss);
                }
                global_step += 1;
            }
            f_agentbest.insert(key, env.f_agentbest());
            let entry = EpisodeLog {
                epoch,
                problem: name.clone(),
                dim: *dim,
                seed: ep_seed,
                steps: env.steps(),
                fes: env.fes(),
                final_sco: env.best_sco(),
                episode_return: ret,
                f_agentbest: env.f_agentbest(),
                lr,
                mean_loss: (!losses.is_empty())
                    .then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            };
            debug!(
                "epoch {epoch} {name} D={dim}: return {:.4}, sco {:.6e}",
                entry.episode_return, entry.final_sco
            );
            log.push(entry);
        }
        info!("finished training epoch {}/{}", epoch + 1, cfg.train.max_epoch);
    }

    let keys: Vec<String> = instances
        .iter()
        .map(|(n, d, _)| instance_key(n, *d))
        .collect();
    let checkpoint = Checkpoint {
        params: agent.online.clone(),
        meta: CheckpointMeta {
            action_scheme: cfg.action_scheme,
            reward: cfg.reward,
            seed: cfg.seed,
            epochs: cfg.train.max_epoch,
            problem_hash: problem_set_hash(&keys),
            train: cfg.train.clone(),
            f_agentbest,
        },
    };
    Ok(TrainOutcome {
        checkpoint,
        initial,
        log,
        grad_steps: agent.grad_steps(),
    })
}
