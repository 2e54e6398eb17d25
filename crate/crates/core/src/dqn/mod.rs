//! Double-DQN controller: value network, replay, schedules, checkpoints.

pub mod agent;
pub mod checkpoint;
pub mod network;
pub mod replay;

use thiserror::Error;

pub use agent::{cosine_lr, explore_rate, DqnAgent, TrainConfig, HIDDEN_UNITS};
pub use checkpoint::{problem_set_hash, Checkpoint, CheckpointError, CheckpointMeta};
pub use network::{
    act_eps_greedy, argmax, loss_and_grad, loss_and_grad_samples, sgd_step, td_target,
    NetworkParams, Sample, Shape,
};
pub use replay::ReplayBuffer;

#[derive(Debug, Error, PartialEq)]
pub enum DqnError {
    #[error("network input has {got} entries, expected {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("network input contains a non-finite value")]
    NonFiniteInput,
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("loss over an empty batch")]
    EmptyBatch,
    #[error("parameters became non-finite after a gradient step")]
    Diverged,
    #[error("invalid training setting: {0}")]
    Config(String),
}
