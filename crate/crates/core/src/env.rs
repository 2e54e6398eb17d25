//! The decision process wrapped around the optimizer.
//!
//! One step = one L-SHADE generation under the relaxation thresholds
//! derived from the chosen action. Rewards combine objective improvement
//! and top-5 violation improvement, weighted by how much violation
//! progress has been made so far.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cop::{sco, BudgetCounter, CopError, EpsilonVector, ProblemRef, DEFAULT_ACCURACY};
use crate::features::{extract_state, FeatureError, RunHistory, StateVector};
use crate::lshade::{Lshade, LshadeConfig, LshadeError, Population};
use crate::seed::{self, Rng};

/// Relaxation floor and the exponent-interpolation endpoint.
pub const DEFAULT_DELTA: f64 = 1e-3;
const DENOM_GUARD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode already terminated")]
    Terminal,
    #[error("action index {index} out of range for {n} actions")]
    BadAction { index: usize, n: usize },
    #[error("invalid environment setting: {0}")]
    Config(String),
    #[error(transparent)]
    Optimizer(#[from] LshadeError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Cop(#[from] CopError),
}

/// How an action level turns into relaxation thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ActionScheme {
    /// `ε = ε_base^a · δ^(1-a)` over `a ∈ {0, 0.1, …, 1}`.
    #[default]
    Exponential,
    /// `ε_t = ε_{t-1} (1 - a)` over `a ∈ {1e-3, …, 1e3}`.
    #[serde(alias = "aa")]
    Aggressive,
    /// `ε_t = ε_{t-1} (1 - a)` over `a ∈ {-0.25, -0.2, …, 0.25}`.
    #[serde(alias = "ca")]
    Conservative,
}

impl ActionScheme {
    pub fn levels(self) -> Vec<f64> {
        match self {
            ActionScheme::Exponential => (0..=10).map(|i| i as f64 / 10.0).collect(),
            ActionScheme::Aggressive => vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3],
            ActionScheme::Conservative => (0..=10).map(|i| (i as f64 - 5.0) / 20.0).collect(),
        }
    }

    pub fn n_actions(self) -> usize {
        match self {
            ActionScheme::Aggressive => 7,
            _ => 11,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionScheme::Exponential => "exponential",
            ActionScheme::Aggressive => "aa",
            ActionScheme::Conservative => "ca",
        }
    }
}

impl fmt::Display for ActionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exponential" => Ok(ActionScheme::Exponential),
            "aa" | "aggressive" => Ok(ActionScheme::Aggressive),
            "ca" | "conservative" => Ok(ActionScheme::Conservative),
            other => Err(format!(
                "unknown action scheme `{other}` (expected exponential, aa, ca)"
            )),
        }
    }
}

/// Per-constraint mean violation of the initial population, floored at `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonBase {
    base: Vec<f64>,
    delta: f64,
}

impl EpsilonBase {
    pub fn new(base: Vec<f64>, delta: f64) -> Result<Self, EnvError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(EnvError::Config(format!("delta must be positive, got {delta}")));
        }
        if base.iter().any(|b| !b.is_finite()) {
            return Err(EnvError::Config("epsilon base must be finite".into()));
        }
        Ok(Self {
            base: base.into_iter().map(|b| b.max(delta)).collect(),
            delta,
        })
    }

    pub fn from_population(pop: &Population, delta: f64) -> Result<Self, EnvError> {
        let m = pop.members.first().map_or(0, |p| p.eval.n_constraints());
        let mut sums = vec![0.0; m];
        for member in &pop.members {
            for (s, c) in sums.iter_mut().zip(member.eval.contributions()) {
                *s += c;
            }
        }
        let n = pop.members.len().max(1) as f64;
        Self::new(sums.into_iter().map(|s| s / n).collect(), delta)
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn as_epsilon(&self) -> EpsilonVector {
        EpsilonVector::new(self.base.clone()).expect("base is finite and positive")
    }
}

/// `ε_i = base_i^a · δ^(1-a)`, with exact endpoints at `a = 0` and `a = 1`.
pub fn epsilon_from_action(level: f64, base: &EpsilonBase) -> EpsilonVector {
    let a = level.clamp(0.0, 1.0);
    let delta = base.delta;
    let eps = base
        .base
        .iter()
        .map(|&b| {
            if a == 0.0 {
                delta
            } else if a == 1.0 {
                b
            } else {
                b.powf(a) * delta.powf(1.0 - a)
            }
        })
        .collect();
    EpsilonVector::new(eps).expect("interpolation of positive values")
}

/// `ε_t = ε_{t-1} (1 - a)`, kept inside `[0, base]` componentwise.
pub fn epsilon_linear_variant(prev: &EpsilonVector, level: f64, base: &EpsilonBase) -> EpsilonVector {
    let eps = prev
        .as_slice()
        .iter()
        .zip(&base.base)
        .map(|(&e, &b)| (e * (1.0 - level)).clamp(0.0, b))
        .collect();
    EpsilonVector::new(eps).expect("clamped into [0, base]")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RewardVariant {
    /// `(r1 (1 - γ) + r2) / 2`
    #[default]
    Full,
    R1,
    R2,
    /// `r1 + r2` without the progress weighting.
    #[serde(alias = "r1+r2")]
    R1r2,
}

impl RewardVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardVariant::Full => "full",
            RewardVariant::R1 => "r1",
            RewardVariant::R2 => "r2",
            RewardVariant::R1r2 => "r1r2",
        }
    }
}

impl fmt::Display for RewardVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(RewardVariant::Full),
            "r1" => Ok(RewardVariant::R1),
            "r2" => Ok(RewardVariant::R2),
            "r1r2" | "r1+r2" => Ok(RewardVariant::R1r2),
            other => Err(format!(
                "unknown reward variant `{other}` (expected full, r1, r2, r1r2)"
            )),
        }
    }
}

/// Quantities the reward at step `t` depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardState {
    pub f_gbest_0: f64,
    pub f_gbest_prev: f64,
    pub f_gbest_now: f64,
    /// Already updated with `f_gbest_now`.
    pub f_agentbest: f64,
    pub nu_top5_0: f64,
    pub nu_top5_prev: f64,
    pub nu_top5_now: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reward {
    pub r1: f64,
    pub r2: f64,
    pub gamma: f64,
    pub r: f64,
}

pub fn compute_reward(rs: &RewardState, variant: RewardVariant) -> Reward {
    let denom = rs.f_gbest_0 - rs.f_agentbest;
    let r1 = if denom > DENOM_GUARD {
        ((rs.f_gbest_prev - rs.f_gbest_now) / denom).max(0.0)
    } else {
        0.0
    };
    let (r2, gamma) = if rs.nu_top5_0 > 0.0 {
        (
            ((rs.nu_top5_prev - rs.nu_top5_now) / rs.nu_top5_0).max(0.0),
            (rs.nu_top5_now / rs.nu_top5_0).clamp(0.0, 1.0),
        )
    } else {
        (0.0, 0.0)
    };
    let r = match variant {
        RewardVariant::Full => (r1 * (1.0 - gamma) + r2) / 2.0,
        RewardVariant::R1 => r1,
        RewardVariant::R2 => r2,
        RewardVariant::R1r2 => r1 + r2,
    };
    Reward {
        r1,
        r2,
        gamma,
        r: r.clamp(0.0, 1.0),
    }
}

/// One replay record.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: StateVector,
    pub a: usize,
    pub r: f64,
    pub s_next: StateVector,
    pub terminal: bool,
}

/// Per-step record for trace output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub fes: u64,
    pub level: f64,
    pub eps_min: f64,
    pub eps_mean: f64,
    pub eps_max: f64,
    pub reward: f64,
    pub sco: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: StateVector,
    pub reward: Reward,
    pub terminal: bool,
    pub trace: StepTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub lshade: LshadeConfig,
    pub maxfes: u64,
    pub delta: f64,
    pub scheme: ActionScheme,
    pub reward: RewardVariant,
    pub accuracy: f64,
}

impl EnvConfig {
    pub fn new(maxfes: u64) -> Self {
        Self {
            lshade: LshadeConfig::default(),
            maxfes,
            delta: DEFAULT_DELTA,
            scheme: ActionScheme::default(),
            reward: RewardVariant::default(),
            accuracy: DEFAULT_ACCURACY,
        }
    }
}

/// A single optimization episode on one problem.
pub struct MetaEnv {
    problem: ProblemRef,
    cfg: EnvConfig,
    levels: Vec<f64>,
    budget: BudgetCounter,
    rng: Rng,
    opt: Lshade,
    hist: RunHistory,
    base: EpsilonBase,
    current_eps: EpsilonVector,
    state: StateVector,
    f_gbest_0: f64,
    f_agentbest: f64,
    best_sco: f64,
    steps: usize,
    terminal: bool,
}

impl MetaEnv {
    /// Initializes the population, the epsilon base and the first state.
    /// `f_agentbest` carries the best objective known for this problem from
    /// earlier episodes (`+inf` when none).
    pub fn reset(
        problem: ProblemRef,
        seed: u64,
        cfg: EnvConfig,
        f_agentbest: f64,
    ) -> Result<Self, EnvError> {
        let mut rng = seed::rng(seed);
        let mut budget = BudgetCounter::new(cfg.maxfes);
        let zeros = EpsilonVector::zeros(problem.n_constraints());
        let opt = Lshade::init(cfg.lshade.clone(), problem.as_ref(), &zeros, &mut budget, &mut rng)?;
        let base = EpsilonBase::from_population(&opt.pop, cfg.delta)?;
        let hist = RunHistory::start(&opt.pop, budget.fes(), budget.maxfes())?;
        let state = extract_state(&opt.pop, problem.lower(), problem.upper(), &hist)?;
        let best_sco = opt
            .pop
            .members
            .iter()
            .map(|m| sco(&m.eval, cfg.accuracy))
            .fold(f64::INFINITY, f64::min);
        let f_gbest_0 = hist.f_gbest;
        Ok(Self {
            levels: cfg.scheme.levels(),
            current_eps: base.as_epsilon(),
            terminal: budget.exhausted(),
            f_agentbest: f_agentbest.min(f_gbest_0),
            problem,
            cfg,
            budget,
            rng,
            opt,
            hist,
            base,
            state,
            f_gbest_0,
            best_sco,
            steps: 0,
        })
    }

    pub fn state(&self) -> StateVector {
        self.state
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn fes(&self) -> u64 {
        self.budget.fes()
    }

    pub fn maxfes(&self) -> u64 {
        self.budget.maxfes()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn best_sco(&self) -> f64 {
        self.best_sco
    }

    pub fn f_agentbest(&self) -> f64 {
        self.f_agentbest
    }

    pub fn epsilon_base(&self) -> &EpsilonBase {
        &self.base
    }

    pub fn population(&self) -> &Population {
        &self.opt.pop
    }

    pub fn history(&self) -> &RunHistory {
        &self.hist
    }

    pub fn problem(&self) -> &ProblemRef {
        &self.problem
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Thresholds action `index` would produce under the active scheme.
    pub fn epsilon_for(&self, index: usize) -> Result<EpsilonVector, EnvError> {
        let level = *self.levels.get(index).ok_or(EnvError::BadAction {
            index,
            n: self.levels.len(),
        })?;
        Ok(match self.cfg.scheme {
            ActionScheme::Exponential => epsilon_from_action(level, &self.base),
            _ => epsilon_linear_variant(&self.current_eps, level, &self.base),
        })
    }

    /// Applies agent action `index` and returns the replay record.
    pub fn step(&mut self, index: usize) -> Result<(Transition, StepOutcome), EnvError> {
        if self.terminal {
            return Err(EnvError::Terminal);
        }
        let eps = self.epsilon_for(index)?;
        let level = self.levels[index];
        // S9 sees the action position in [0, 1]; identical to the level for the exponential scheme
        let observed = index as f64 / (self.levels.len() - 1) as f64;
        let s = self.state;
        let mut outcome = self.step_with_epsilon(eps, observed)?;
        outcome.trace.level = level;
        let transition = Transition {
            s,
            a: index,
            r: outcome.reward.r,
            s_next: outcome.state,
            terminal: outcome.terminal,
        };
        Ok((transition, outcome))
    }

    /// Runs one generation under explicit thresholds. `observed_level` is
    /// what the next state reports as the previous action.
    pub fn step_with_epsilon(
        &mut self,
        eps: EpsilonVector,
        observed_level: f64,
    ) -> Result<StepOutcome, EnvError> {
        if self.terminal {
            return Err(EnvError::Terminal);
        }
        let f_gbest_prev = self.hist.f_gbest;
        let report = self.opt.generation_step(
            self.problem.as_ref(),
            &eps,
            &mut self.budget,
            &mut self.rng,
        )?;
        for e in &report.trials {
            self.best_sco = self.best_sco.min(sco(e, self.cfg.accuracy));
        }
        self.hist.observe(report.trials.iter().map(|e| e.f()));
        self.hist.advance(&self.opt.pop, observed_level, self.budget.fes());
        self.f_agentbest = self.f_agentbest.min(self.hist.f_gbest);
        let rs = RewardState {
            f_gbest_0: self.f_gbest_0,
            f_gbest_prev,
            f_gbest_now: self.hist.f_gbest,
            f_agentbest: self.f_agentbest,
            nu_top5_0: self.hist.nu_top5_0,
            nu_top5_prev: self.hist.nu_top5_prev,
            nu_top5_now: self.hist.nu_top5_now,
        };
        let reward = compute_reward(&rs, self.cfg.reward);
        self.state = extract_state(
            &self.opt.pop,
            self.problem.lower(),
            self.problem.upper(),
            &self.hist,
        )?;
        self.current_eps = eps;
        self.steps += 1;
        self.terminal = report.exhausted || self.budget.exhausted();
        let (eps_min, eps_mean, eps_max) = self.current_eps.summary();
        Ok(StepOutcome {
            state: self.state,
            reward,
            terminal: self.terminal,
            trace: StepTrace {
                step: self.steps,
                fes: self.budget.fes(),
                level: observed_level,
                eps_min,
                eps_mean,
                eps_max,
                reward: reward.r,
                sco: self.best_sco,
            },
        })
    }
}
