//! Experiment configuration, read from TOML. Every field has a default;
//! unknown keys are rejected.
//!
//! ```toml
//! problems = ["cec12", "cec14"]
//! dims = [10]
//! runs = 10
//! seed = 0
//! action_scheme = "exponential"
//! reward = "full"
//!
//! [train]
//! max_epoch = 50
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dqn::TrainConfig;
use crate::env::{ActionScheme, EnvConfig, RewardVariant, DEFAULT_DELTA};
use crate::lshade::LshadeConfig;
use crate::problems::ProblemRegistry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Problems used by `train`, `evaluate`, `baseline` and `loo`.
    pub problems: Vec<String>,
    /// Training side of `split` and `ablate`.
    pub train_problems: Vec<String>,
    /// Test side of `split` and `ablate`.
    pub test_problems: Vec<String>,
    pub dims: Vec<usize>,
    pub pop_size: usize,
    /// Evaluation budget per dimension: `maxfes = maxfes_per_dim * D`.
    pub maxfes_per_dim: u64,
    pub runs: usize,
    pub seed: u64,
    pub lpsr: bool,
    pub action_scheme: ActionScheme,
    pub reward: RewardVariant,
    /// Zero the constraint features when the policy is queried at test time.
    pub mask_state: bool,
    pub delta: f64,
    /// Level used by `static-eps` when none is given.
    pub static_level: f64,
    /// Exponent used by `scheduled-eps` when none is given.
    pub cp: f64,
    /// Run evaluation jobs on the rayon pool. Output does not depend on it.
    pub parallel: bool,
    pub shift_file: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problems: vec!["cec12".into(), "cec14".into()],
            train_problems: Vec::new(),
            test_problems: Vec::new(),
            dims: vec![10],
            pop_size: 50,
            maxfes_per_dim: 50,
            runs: 10,
            seed: 0,
            lpsr: false,
            action_scheme: ActionScheme::Exponential,
            reward: RewardVariant::Full,
            mask_state: false,
            delta: DEFAULT_DELTA,
            static_level: 0.5,
            cp: 5.0,
            parallel: true,
            shift_file: None,
            out_dir: PathBuf::from("results"),
            train: TrainConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            config_err(format!("cannot read config `{}`: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn maxfes(&self, dim: usize) -> u64 {
        self.maxfes_per_dim * dim as u64
    }

    pub fn lshade(&self) -> LshadeConfig {
        LshadeConfig {
            pop_size: self.pop_size,
            lpsr: self.lpsr,
            ..LshadeConfig::default()
        }
    }

    pub fn env_config(&self, dim: usize) -> EnvConfig {
        EnvConfig {
            lshade: self.lshade(),
            maxfes: self.maxfes(dim),
            delta: self.delta,
            scheme: self.action_scheme,
            reward: self.reward,
            ..EnvConfig::new(self.maxfes(dim))
        }
    }

    pub fn registry(&self) -> Result<ProblemRegistry, HarnessError> {
        match &self.shift_file {
            Some(p) => Ok(ProblemRegistry::with_shift_file(p)?),
            None => Ok(ProblemRegistry::new()),
        }
    }

    /// Checks everything that does not depend on which protocol runs.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.lshade()
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        self.train.validate().map_err(|e| config_err(e.to_string()))?;
        if self.dims.is_empty() {
            return Err(config_err("dims must not be empty"));
        }
        if self.runs == 0 {
            return Err(config_err("runs must be at least 1"));
        }
        for &d in &self.dims {
            if self.maxfes(d) < 2 * self.pop_size as u64 {
                return Err(config_err(format!(
                    "maxfes {} at D = {d} is below twice the population size {}",
                    self.maxfes(d),
                    self.pop_size
                )));
            }
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(config_err("delta must be positive"));
        }
        if !(0.0..=1.0).contains(&self.static_level) {
            return Err(config_err("static_level must lie in [0, 1]"));
        }
        if !(self.cp > 0.0 && self.cp.is_finite()) {
            return Err(config_err("cp must be positive"));
        }
        let registry = self.registry()?;
        for name in self
            .problems
            .iter()
            .chain(&self.train_problems)
            .chain(&self.test_problems)
        {
            for &d in &self.dims {
                registry.supports(name, d)?;
            }
        }
        Ok(())
    }

    /// Disjoint, non-empty train/test lists for `split` and `ablate`.
    pub fn split_lists(&self) -> Result<(&[String], &[String]), HarnessError> {
        check_split(&self.train_problems, &self.test_problems)?;
        Ok((&self.train_problems, &self.test_problems))
    }
}

pub fn check_split(train: &[String], test: &[String]) -> Result<(), HarnessError> {
    if train.is_empty() {
        return Err(config_err("training problem list is empty"));
    }
    if test.is_empty() {
        return Err(config_err("test problem list is empty"));
    }
    if let Some(p) = test.iter().find(|p| train.contains(p)) {
        return Err(config_err(format!("`{p}` is in both the training and test lists")));
    }
    Ok(())
}
