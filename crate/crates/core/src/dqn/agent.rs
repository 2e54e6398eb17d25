//! Online/target network pair with replay and schedules.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::network::{act_eps_greedy, loss_and_grad, sgd_step, NetworkParams, Shape};
use super::replay::ReplayBuffer;
use super::DqnError;
use crate::env::Transition;
use crate::features::{StateVector, STATE_DIM};
use crate::seed::Rng;

pub const HIDDEN_UNITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epoch: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub discount: f64,
    /// Gradient steps between target-network copies.
    pub target_sync: usize,
    pub explore_start: f64,
    pub explore_end: f64,
    /// Fraction of all meta-steps over which the explore rate decays.
    pub explore_fraction: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epoch: 50,
            lr_start: 5e-3,
            lr_end: 1e-4,
            discount: 1.0,
            target_sync: 10,
            explore_start: 0.9,
            explore_end: 0.05,
            explore_fraction: 0.8,
            buffer_capacity: 4096,
            batch_size: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DqnError> {
        let bad = |msg: &str| Err(DqnError::Config(msg.to_string()));
        if self.max_epoch == 0 {
            return bad("max_epoch must be at least 1");
        }
        if !(self.lr_end > 0.0 && self.lr_end <= self.lr_start && self.lr_start.is_finite()) {
            return bad("learning rates need 0 < lr_end <= lr_start");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if self.target_sync == 0 {
            return bad("target_sync must be at least 1");
        }
        for (name, v) in [
            ("explore_start", self.explore_start),
            ("explore_end", self.explore_end),
            ("explore_fraction", self.explore_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DqnError::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("need 1 <= batch_size <= buffer_capacity");
        }
        Ok(())
    }
}

/// Cosine-annealed learning rate, `lr_start` at epoch 0 and `lr_end` at
/// `max_epoch`.
pub fn cosine_lr(epoch: usize, cfg: &TrainConfig) -> f64 {
    let t = (epoch.min(cfg.max_epoch) as f64) / cfg.max_epoch as f64;
    cfg.lr_end + 0.5 * (cfg.lr_start - cfg.lr_end) * (1.0 + (PI * t).cos())
}

/// Linear decay from `explore_start` to `explore_end` over the first
/// `explore_fraction` of `total_steps`, constant afterwards.
pub fn explore_rate(step: usize, total_steps: usize, cfg: &TrainConfig) -> f64 {
    let horizon = cfg.explore_fraction * total_steps as f64;
    if horizon <= 0.0 || step as f64 >= horizon {
        return cfg.explore_end;
    }
    let t = step as f64 / horizon;
    cfg.explore_start + t * (cfg.explore_end - cfg.explore_start)
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: NetworkParams,
    pub target: NetworkParams,
    pub buffer: ReplayBuffer,
    cfg: TrainConfig,
    grad_steps: u64,
}

impl DqnAgent {
    /// Fresh agent with Glorot-initialized online weights and an identical
    /// target copy.
    pub fn new(n_actions: usize, cfg: TrainConfig, rng: &mut Rng) -> Result<Self, DqnError> {
        cfg.validate()?;
        let online = NetworkParams::glorot(Shape::new(STATE_DIM, HIDDEN_UNITS, n_actions), rng);
        Ok(Self::from_params(online, cfg))
    }

    pub fn from_params(online: NetworkParams, cfg: TrainConfig) -> Self {
        Self {
            target: online.clone(),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            online,
            cfg,
            grad_steps: 0,
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    pub fn n_actions(&self) -> usize {
        self.online.shape().n_out
    }

    pub fn q_values(&self, s: &StateVector) -> Result<Vec<f64>, DqnError> {
        self.online.forward(s.as_slice())
    }

    pub fn act(&self, s: &StateVector, explore: f64, rng: &mut Rng) -> Result<usize, DqnError> {
        Ok(act_eps_greedy(&self.q_values(s)?, explore, rng))
    }

    pub fn remember(&mut self, tr: Transition) {
        self.buffer.push(tr);
    }

    /// One gradient step on a replay minibatch once the buffer holds a full
    /// batch. Returns the batch loss when a step was taken.
    pub fn learn(&mut self, lr: f64, rng: &mut Rng) -> Result<Option<f64>, DqnError> {
        if self.buffer.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.cfg.batch_size, rng);
        let (loss, grad) = loss_and_grad(&batch, &self.online, &self.target, self.cfg.discount)?;
        sgd_step(&mut self.online, &grad, lr);
        if !self.online.is_finite() {
            return Err(DqnError::Diverged);
        }
        self.grad_steps += 1;
        if self.grad_steps.is_multiple_of(self.cfg.target_sync as u64) {
            self.sync_target();
        }
        Ok(Some(loss))
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
    }
}
