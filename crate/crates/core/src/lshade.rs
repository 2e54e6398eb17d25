//! L-SHADE with epsilon-lexicographic survivor selection.
//!
//! current-to-pbest/1 mutation with an external archive, binomial
//! crossover with midpoint bound repair, success-history adaptation of F
//! and CR, and optional linear population size reduction. The relaxation
//! thresholds are supplied from outside on every generation.

use std::cmp::Ordering;

use rand::Rng as _;
use rand_distr::{Cauchy, Distribution, Normal};
use thiserror::Error;

use crate::cop::{
    eps_compare, relaxed_violation, violation, BudgetCounter, ConstrainedProblem, CopError,
    EpsilonVector, Evaluation, Ranked,
};
use crate::seed::Rng;

pub const MIN_POPULATION: usize = 4;

#[derive(Debug, Error)]
pub enum LshadeError {
    #[error("population size {0} is below the minimum of {MIN_POPULATION}")]
    PopulationTooSmall(usize),
    #[error("budget has {remaining} evaluations left, initialization needs {needed}")]
    InsufficientBudget { needed: u64, remaining: u64 },
    #[error("invalid optimizer setting: {0}")]
    Config(String),
    #[error(transparent)]
    Cop(#[from] CopError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LshadeConfig {
    pub pop_size: usize,
    pub memory_size: usize,
    pub p_rate: f64,
    pub lpsr: bool,
    pub min_pop: usize,
}

impl Default for LshadeConfig {
    fn default() -> Self {
        Self {
            pop_size: 50,
            memory_size: 5,
            p_rate: 0.11,
            lpsr: false,
            min_pop: MIN_POPULATION,
        }
    }
}

impl LshadeConfig {
    pub fn validate(&self) -> Result<(), LshadeError> {
        if self.pop_size < MIN_POPULATION {
            return Err(LshadeError::PopulationTooSmall(self.pop_size));
        }
        if self.memory_size == 0 {
            return Err(LshadeError::Config("memory_size must be >= 1".into()));
        }
        if !(self.p_rate > 0.0 && self.p_rate <= 0.5) {
            return Err(LshadeError::Config(format!(
                "p_rate {} outside (0, 0.5]",
                self.p_rate
            )));
        }
        if self.min_pop < MIN_POPULATION || self.min_pop > self.pop_size {
            return Err(LshadeError::Config(format!(
                "min_pop {} outside [{MIN_POPULATION}, {}]",
                self.min_pop, self.pop_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Individual {
    pub x: Vec<f64>,
    pub eval: Evaluation,
    pub nu: f64,
    pub nu_eps: f64,
}

impl Individual {
    pub fn new(x: Vec<f64>, eval: Evaluation, eps: &EpsilonVector) -> Result<Self, CopError> {
        let nu = violation(&eval);
        let nu_eps = relaxed_violation(&eval, eps)?;
        Ok(Self { x, eval, nu, nu_eps })
    }

    pub fn f(&self) -> f64 {
        self.eval.f()
    }

    pub fn ranked(&self) -> Ranked {
        Ranked::new(self.eval.f(), self.nu_eps)
    }

    pub fn refresh(&mut self, eps: &EpsilonVector) -> Result<(), CopError> {
        self.nu_eps = relaxed_violation(&self.eval, eps)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    pub members: Vec<Individual>,
    pub archive: Vec<Vec<f64>>,
    pub generation: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn refresh(&mut self, eps: &EpsilonVector) -> Result<(), CopError> {
        self.members.iter_mut().try_for_each(|m| m.refresh(eps))
    }

    /// Member indices from best to worst under the cached relaxed
    /// violations; ties keep index order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.members.len()).collect();
        idx.sort_by(|&a, &b| eps_compare(self.members[a].ranked(), self.members[b].ranked()));
        idx
    }

    pub fn best(&self) -> &Individual {
        &self.members[self.ranking()[0]]
    }
}

/// Uniform initialization of `n` members, each evaluated through `budget`.
pub fn init_population(
    problem: &dyn ConstrainedProblem,
    n: usize,
    eps: &EpsilonVector,
    budget: &mut BudgetCounter,
    rng: &mut Rng,
) -> Result<Population, LshadeError> {
    if n < MIN_POPULATION {
        return Err(LshadeError::PopulationTooSmall(n));
    }
    if budget.remaining() < n as u64 {
        return Err(LshadeError::InsufficientBudget {
            needed: n as u64,
            remaining: budget.remaining(),
        });
    }
    let (lo, hi) = (problem.lower(), problem.upper());
    let mut members = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(&l, &u)| l + (u - l) * rng.random::<f64>())
            .collect();
        let eval = budget.evaluate(problem, &x)?;
        members.push(Individual::new(x, eval, eps)?);
    }
    Ok(Population {
        members,
        archive: Vec::new(),
        generation: 0,
    })
}

/// `x_i + F (x_pbest - x_i) + F (x_r1 - x_r2)`.
pub fn donor(x_i: &[f64], x_pbest: &[f64], x_r1: &[f64], x_r2: &[f64], f: f64) -> Vec<f64> {
    (0..x_i.len())
        .map(|j| x_i[j] + f * (x_pbest[j] - x_i[j]) + f * (x_r1[j] - x_r2[j]))
        .collect()
}

/// current-to-pbest/1 donor for member `i`. `ranking` is the population
/// order from [`Population::ranking`].
pub fn mutate_current_to_pbest(
    i: usize,
    pop: &Population,
    ranking: &[usize],
    f: f64,
    p_rate: f64,
    rng: &mut Rng,
) -> Vec<f64> {
    let n = pop.members.len();
    let top = ((p_rate * n as f64).ceil() as usize).clamp(1, n);
    let pbest = ranking[rng.random_range(0..top)];
    let r1 = loop {
        let r = rng.random_range(0..n);
        if r != i {
            break r;
        }
    };
    let pool = n + pop.archive.len();
    let r2 = loop {
        let r = rng.random_range(0..pool);
        if r != i && r != r1 {
            break r;
        }
    };
    let x_r2 = if r2 < n {
        &pop.members[r2].x
    } else {
        &pop.archive[r2 - n]
    };
    donor(
        &pop.members[i].x,
        &pop.members[pbest].x,
        &pop.members[r1].x,
        x_r2,
        f,
    )
}

/// Binomial crossover followed by midpoint repair toward any violated bound.
pub fn crossover_binomial(
    x_i: &[f64],
    v: &[f64],
    cr: f64,
    lower: &[f64],
    upper: &[f64],
    rng: &mut Rng,
) -> Vec<f64> {
    let d = x_i.len();
    let j_rand = rng.random_range(0..d);
    let mut u: Vec<f64> = (0..d)
        .map(|j| {
            if j == j_rand || rng.random::<f64>() < cr {
                v[j]
            } else {
                x_i[j]
            }
        })
        .collect();
    repair(&mut u, x_i, lower, upper);
    u
}

pub fn repair(u: &mut [f64], parent: &[f64], lower: &[f64], upper: &[f64]) {
    for j in 0..u.len() {
        if u[j] < lower[j] {
            u[j] = 0.5 * (parent[j] + lower[j]);
        } else if u[j] > upper[j] {
            u[j] = 0.5 * (parent[j] + upper[j]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    /// Trial strictly better; carries the improvement weight.
    TrialWins { weight: f64 },
    ParentStays,
}

/// Survivor choice under the epsilon-lexicographic rule. Ties keep the
/// parent. The weight is the relaxed-violation decrease when the relaxed
/// violations differ, otherwise the objective decrease.
pub fn select(parent: &Individual, trial: &Individual) -> Selection {
    match eps_compare(trial.ranked(), parent.ranked()) {
        Ordering::Less => {
            let weight = if trial.nu_eps != parent.nu_eps {
                parent.nu_eps - trial.nu_eps
            } else {
                parent.f() - trial.f()
            };
            Selection::TrialWins { weight }
        }
        _ => Selection::ParentStays,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Success {
    pub f: f64,
    pub cr: f64,
    pub weight: f64,
}

/// Circular memories of successful scale factors and crossover rates.
/// A `None` CR slot is the terminal value: CR is then fixed at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessHistory {
    pub m_f: Vec<f64>,
    pub m_cr: Vec<Option<f64>>,
    pub k: usize,
}

impl SuccessHistory {
    pub fn new(size: usize) -> Self {
        Self {
            m_f: vec![0.5; size],
            m_cr: vec![Some(0.5); size],
            k: 0,
        }
    }

    /// Draws `(F_i, CR_i)` from a uniformly chosen slot.
    pub fn sample(&self, rng: &mut Rng) -> (f64, f64) {
        let r = rng.random_range(0..self.m_f.len());
        let cauchy = Cauchy::new(self.m_f[r], 0.1).expect("scale is positive");
        let f = loop {
            let v: f64 = cauchy.sample(rng);
            if v > 0.0 {
                break v.min(1.0);
            }
        };
        let cr = match self.m_cr[r] {
            Some(mu) => {
                let normal = Normal::new(mu, 0.1).expect("sd is positive");
                normal.sample(rng).clamp(0.0, 1.0)
            }
            None => 0.0,
        };
        (f, cr)
    }
}

/// Weighted Lehmer mean for F and weighted arithmetic mean for CR, written
/// into slot `k`. No successes leaves the memory untouched.
pub fn update_memory(hist: &mut SuccessHistory, successes: &[Success]) {
    if successes.is_empty() {
        return;
    }
    let total: f64 = successes.iter().map(|s| s.weight).sum();
    let weight = |s: &Success| {
        if total > 0.0 {
            s.weight / total
        } else {
            1.0 / successes.len() as f64
        }
    };
    let num: f64 = successes.iter().map(|s| weight(s) * s.f * s.f).sum();
    let den: f64 = successes.iter().map(|s| weight(s) * s.f).sum();
    let k = hist.k;
    hist.m_f[k] = num / den;
    let max_cr = successes.iter().map(|s| s.cr).fold(0.0, f64::max);
    hist.m_cr[k] = match hist.m_cr[k] {
        Some(_) if max_cr > 0.0 => Some(successes.iter().map(|s| weight(s) * s.cr).sum()),
        _ => None,
    };
    hist.k = (k + 1) % hist.m_f.len();
}

/// Linear population size reduction target.
pub fn lpsr(fes: u64, maxfes: u64, n_init: usize, n_min: usize) -> usize {
    let frac = fes.min(maxfes) as f64 / maxfes as f64;
    let target = n_init as f64 - (n_init - n_min) as f64 * frac;
    (target.round() as usize).clamp(n_min, n_init)
}

#[derive(Debug, Clone, Default)]
pub struct GenerationReport {
    /// Evaluations of every trial produced this generation, in order.
    pub trials: Vec<Evaluation>,
    pub successes: usize,
    /// Budget ran out during or at the end of this generation.
    pub exhausted: bool,
}

/// Optimizer state for one run.
#[derive(Debug, Clone)]
pub struct Lshade {
    pub cfg: LshadeConfig,
    pub pop: Population,
    pub hist: SuccessHistory,
}

impl Lshade {
    pub fn init(
        cfg: LshadeConfig,
        problem: &dyn ConstrainedProblem,
        eps: &EpsilonVector,
        budget: &mut BudgetCounter,
        rng: &mut Rng,
    ) -> Result<Self, LshadeError> {
        cfg.validate()?;
        let pop = init_population(problem, cfg.pop_size, eps, budget, rng)?;
        let hist = SuccessHistory::new(cfg.memory_size);
        Ok(Self { cfg, pop, hist })
    }

    /// One generation under `eps`; trials past the budget are skipped.
    pub fn generation_step(
        &mut self,
        problem: &dyn ConstrainedProblem,
        eps: &EpsilonVector,
        budget: &mut BudgetCounter,
        rng: &mut Rng,
    ) -> Result<GenerationReport, LshadeError> {
        self.pop.refresh(eps)?;
        let ranking = self.pop.ranking();
        let n = self.pop.len();
        let (lo, hi) = (problem.lower(), problem.upper());

        let mut trials = Vec::with_capacity(n);
        for i in 0..n {
            if budget.exhausted() {
                break;
            }
            let (f, cr) = self.hist.sample(rng);
            let v = mutate_current_to_pbest(i, &self.pop, &ranking, f, self.cfg.p_rate, rng);
            let u = crossover_binomial(&self.pop.members[i].x, &v, cr, lo, hi, rng);
            let eval = budget.evaluate(problem, &u)?;
            trials.push((i, f, cr, Individual::new(u, eval, eps)?));
        }

        let mut report = GenerationReport::default();
        let mut successes = Vec::new();
        for (i, f, cr, trial) in trials {
            report.trials.push(trial.eval.clone());
            if let Selection::TrialWins { weight } = select(&self.pop.members[i], &trial) {
                let parent = std::mem::replace(&mut self.pop.members[i], trial);
                self.pop.archive.push(parent.x);
                successes.push(Success { f, cr, weight });
            }
        }
        report.successes = successes.len();
        trim_archive(&mut self.pop.archive, self.pop.members.len(), rng);
        update_memory(&mut self.hist, &successes);

        if self.cfg.lpsr {
            let target = lpsr(budget.fes(), budget.maxfes(), self.cfg.pop_size, self.cfg.min_pop);
            if target < self.pop.len() {
                let mut order = self.pop.ranking();
                order.truncate(target);
                order.sort_unstable();
                let old = std::mem::take(&mut self.pop.members);
                self.pop.members = old
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| order.binary_search(i).is_ok())
                    .map(|(_, m)| m)
                    .collect();
                trim_archive(&mut self.pop.archive, target, rng);
            }
        }
        self.pop.generation += 1;
        report.exhausted = budget.exhausted();
        Ok(report)
    }
}

fn trim_archive(archive: &mut Vec<Vec<f64>>, cap: usize, rng: &mut Rng) {
    while archive.len() > cap {
        let r = rng.random_range(0..archive.len());
        archive.swap_remove(r);
    }
}
