//! Constrained problem definitions and constraint-violation accounting.
//!
//! A problem minimizes `f(x)` over a box subject to `p` inequality
//! constraints `g_i(x) <= 0` and `q` equality constraints `h_j(x) = 0`.
//! Candidates are ranked lexicographically on their (possibly relaxed)
//! total violation first and the objective second.

use std::cmp::Ordering;
use std::sync::Arc;

use thiserror::Error;

/// Accuracy level under which a constraint counts as satisfied for reporting.
pub const DEFAULT_ACCURACY: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CopError {
    #[error("problem `{problem}` produced a non-finite {what} value")]
    NonFinite { problem: String, what: &'static str },
    #[error("expected {expected} {what} values, got {got}")]
    Arity {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("epsilon vector has length {got} but the problem has {expected} constraints")]
    EpsilonLength { expected: usize, got: usize },
    #[error("epsilon entries must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error("candidate lies outside the search box at coordinate {index}")]
    OutOfBounds { index: usize },
    #[error("candidate has dimension {got}, problem expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("evaluation budget of {maxfes} exhausted")]
    BudgetExhausted { maxfes: u64 },
    #[error("invalid bounds: {0}")]
    Bounds(String),
}

/// Objective and constraint values for a single candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    f: f64,
    g: Vec<f64>,
    h: Vec<f64>,
}

impl Evaluation {
    /// Builds an evaluation, rejecting NaN or infinite entries.
    pub fn new(f: f64, g: Vec<f64>, h: Vec<f64>) -> Result<Self, CopError> {
        let problem = String::from("<anonymous>");
        if !f.is_finite() {
            return Err(CopError::NonFinite { problem, what: "objective" });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(CopError::NonFinite { problem, what: "inequality" });
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(CopError::NonFinite { problem, what: "equality" });
        }
        Ok(Self { f, g, h })
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Number of constraints `m = p + q`.
    pub fn n_constraints(&self) -> usize {
        self.g.len() + self.h.len()
    }

    /// Per-constraint violation contributions, inequalities first.
    pub fn contributions(&self) -> impl Iterator<Item = f64> + '_ {
        self.g
            .iter()
            .map(|&g| g.max(0.0))
            .chain(self.h.iter().map(|h| h.abs()))
    }
}

/// Per-constraint relaxation thresholds, inequalities first.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonVector(Vec<f64>);

impl EpsilonVector {
    pub fn new(eps: Vec<f64>) -> Result<Self, CopError> {
        if let Some(&bad) = eps.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(CopError::InvalidEpsilon(bad));
        }
        Ok(Self(eps))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// (min, mean, max) over the components; zeros when empty.
    pub fn summary(&self) -> (f64, f64, f64) {
        if self.0.is_empty() {
            return (0.0, 0.0, 0.0);
        }
        let min = self.0.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = self.0.iter().sum::<f64>() / self.0.len() as f64;
        (min, mean, max)
    }
}

/// Total constraint violation: positive inequality excess plus absolute
/// equality residual.
pub fn violation(e: &Evaluation) -> f64 {
    e.contributions().sum()
}

/// Violation where each constraint's contribution is dropped when it does
/// not strictly exceed its threshold.
pub fn relaxed_violation(e: &Evaluation, eps: &EpsilonVector) -> Result<f64, CopError> {
    if eps.len() != e.n_constraints() {
        return Err(CopError::EpsilonLength {
            expected: e.n_constraints(),
            got: eps.len(),
        });
    }
    Ok(e.contributions()
        .zip(eps.as_slice())
        .map(|(v, &t)| if v > t { v } else { 0.0 })
        .sum())
}

/// A candidate's sort key under the epsilon-lexicographic rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ranked {
    pub f: f64,
    pub nu_eps: f64,
}

impl Ranked {
    pub fn new(f: f64, nu_eps: f64) -> Self {
        Self { f, nu_eps }
    }
}

/// `Less` means `a` is better. Violation first, objective second; `Equal`
/// only when both components match. Callers resolve ties.
pub fn eps_compare(a: Ranked, b: Ranked) -> Ordering {
    numeric_cmp(a.nu_eps, b.nu_eps).then_with(|| numeric_cmp(a.f, b.f))
}

/// Numeric order, so `-0.0 == 0.0`; NaN (never produced by a valid
/// evaluation) falls back to the total order.
fn numeric_cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| a.total_cmp(&b))
}

/// Every inequality at most `accuracy` and every equality residual at most
/// `accuracy` in absolute value.
pub fn is_feasible(e: &Evaluation, accuracy: f64) -> bool {
    e.g.iter().all(|&g| g <= accuracy) && e.h.iter().all(|h| h.abs() <= accuracy)
}

/// Objective plus violation, with the violation zeroed for solutions that
/// are feasible at the given accuracy.
pub fn sco(e: &Evaluation, accuracy: f64) -> f64 {
    if is_feasible(e, accuracy) {
        e.f
    } else {
        e.f + violation(e)
    }
}

/// A box-constrained problem with inequality and equality constraints.
///
/// Implementations must be deterministic and return exactly
/// [`n_ineq`](Self::n_ineq) and [`n_eq`](Self::n_eq) constraint values.
pub trait ConstrainedProblem: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    fn n_ineq(&self) -> usize;
    fn n_eq(&self) -> usize;

    /// Raw `(f, g, h)` at `x`. Callers go through [`evaluate`] which
    /// validates arity and finiteness.
    fn compute(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>);

    /// A known feasible point, when the construction provides one.
    fn certified_feasible(&self) -> Option<Vec<f64>> {
        None
    }

    fn n_constraints(&self) -> usize {
        self.n_ineq() + self.n_eq()
    }
}

pub type ProblemRef = Arc<dyn ConstrainedProblem>;

/// Validated evaluation of `problem` at `x`; does not touch any budget.
pub fn evaluate(problem: &dyn ConstrainedProblem, x: &[f64]) -> Result<Evaluation, CopError> {
    if x.len() != problem.dim() {
        return Err(CopError::Dimension {
            expected: problem.dim(),
            got: x.len(),
        });
    }
    let (lo, hi) = (problem.lower(), problem.upper());
    if let Some(index) = (0..x.len()).find(|&i| !(x[i] >= lo[i] && x[i] <= hi[i])) {
        return Err(CopError::OutOfBounds { index });
    }
    let (f, g, h) = problem.compute(x);
    if g.len() != problem.n_ineq() {
        return Err(CopError::Arity {
            what: "inequality",
            expected: problem.n_ineq(),
            got: g.len(),
        });
    }
    if h.len() != problem.n_eq() {
        return Err(CopError::Arity {
            what: "equality",
            expected: problem.n_eq(),
            got: h.len(),
        });
    }
    Evaluation::new(f, g, h).map_err(|e| match e {
        CopError::NonFinite { what, .. } => CopError::NonFinite {
            problem: problem.name().to_string(),
            what,
        },
        other => other,
    })
}

/// Checks `lower < upper` componentwise.
pub fn check_bounds(lower: &[f64], upper: &[f64]) -> Result<(), CopError> {
    if lower.len() != upper.len() {
        return Err(CopError::Bounds(format!(
            "{} lower vs {} upper entries",
            lower.len(),
            upper.len()
        )));
    }
    if let Some(i) = (0..lower.len()).find(|&i| lower[i].partial_cmp(&upper[i]) != Some(std::cmp::Ordering::Less)) {
        return Err(CopError::Bounds(format!("lower[{i}] >= upper[{i}]")));
    }
    Ok(())
}

/// Function-evaluation counter for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetCounter {
    fes: u64,
    maxfes: u64,
}

impl BudgetCounter {
    pub fn new(maxfes: u64) -> Self {
        Self { fes: 0, maxfes }
    }

    pub fn fes(&self) -> u64 {
        self.fes
    }

    pub fn maxfes(&self) -> u64 {
        self.maxfes
    }

    pub fn remaining(&self) -> u64 {
        self.maxfes - self.fes
    }

    pub fn exhausted(&self) -> bool {
        self.fes >= self.maxfes
    }

    /// Evaluates through the budget: refused once `maxfes` is reached.
    pub fn evaluate(
        &mut self,
        problem: &dyn ConstrainedProblem,
        x: &[f64],
    ) -> Result<Evaluation, CopError> {
        if self.exhausted() {
            return Err(CopError::BudgetExhausted {
                maxfes: self.maxfes,
            });
        }
        self.fes += 1;
        debug_assert!(self.fes <= self.maxfes);
        evaluate(problem, x)
    }
}
