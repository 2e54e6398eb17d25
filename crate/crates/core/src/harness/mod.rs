//! Experiment orchestration: training, evaluation protocols, baselines,
//! ablations and result files.

pub mod config;
pub mod output;
pub mod protocols;
pub mod run;
pub mod train;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{check_split, ExperimentConfig};
pub use output::{export_curves, normalized_curves, read_jsonl, write_jsonl, CurvePoint, CurveRow};
pub use protocols::{
    ablate, evaluate_checkpoint, leave_one_out, run_baseline, split_protocol, Ablation, Baseline,
    ProtocolOutput, TRAINED,
};
pub use run::{
    evaluate_policy, instance_key, run_episode, run_seed, scheduled_epsilon, summarize, Episode,
    Policy, RunRecord, SummaryRow,
};
pub use train::{steps_per_episode, train, untrained_params, EpisodeLog, TrainOutcome};

use crate::dqn::{CheckpointError, DqnError};
use crate::env::EnvError;
use crate::problems::ProblemError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{context}: {source}")]
    Env {
        context: String,
        #[source]
        source: EnvError,
    },
    #[error("{context}: {source}")]
    Agent {
        context: String,
        #[source]
        source: DqnError,
    },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {msg}", path.display())]
    Csv { path: PathBuf, msg: String },
}

impl HarnessError {
    /// Whether the failure comes from the user's configuration rather than
    /// from running it.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_)
                | HarnessError::Problem(
                    ProblemError::UnknownName { .. }
                        | ProblemError::UnsupportedDim { .. }
                        | ProblemError::UnknownKind(_)
                        | ProblemError::ShiftFile { .. }
                        | ProblemError::Io(_)
                )
        )
    }
}
