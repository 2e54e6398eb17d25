//! The two closed-form constrained benchmark functions (CEC12, CEC14) on a
//! shifted variable `y = x - o` over `[-100, 100]^D`.

use std::f64::consts::PI;

use crate::cop::{ConstrainedProblem, CopError, Evaluation};

pub const SEARCH_RANGE: f64 = 100.0;

/// Shift vector with its search range.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    pub o: Vec<f64>,
    pub range: f64,
}

impl ShiftSpec {
    /// The optimum must stay interior, so every `|o_i| < range`.
    pub fn new(o: Vec<f64>, range: f64) -> Result<Self, CopError> {
        if let Some(i) = o.iter().position(|v| !v.is_finite() || v.abs() >= range) {
            return Err(CopError::Bounds(format!(
                "shift component {i} = {} is not strictly inside ±{range}",
                o[i]
            )));
        }
        Ok(Self { o, range })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            o: vec![0.0; dim],
            range: SEARCH_RANGE,
        }
    }

    pub fn shifted(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.o).map(|(a, b)| a - b).collect()
    }
}

fn cec12_raw(y: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let f = y
        .iter()
        .map(|v| v * v - 10.0 * (2.0 * PI * v).cos() + 10.0)
        .sum();
    let abs_sum: f64 = y.iter().map(|v| v.abs()).sum();
    let sq_sum: f64 = y.iter().map(|v| v * v).sum();
    (f, vec![4.0 - abs_sum], vec![sq_sum - 4.0])
}

fn cec14_raw(y: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let f = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let sq_sum: f64 = y.iter().map(|v| v * v).sum();
    let d = y.len() as f64;
    (f, vec![sq_sum - 100.0 * d], vec![f.cos() + f.sin()])
}

/// Rastrigin objective on the sphere `Σy² = 4` with `Σ|y| >= 4`.
pub fn cec12(x: &[f64], shift: &ShiftSpec) -> Result<Evaluation, CopError> {
    let (f, g, h) = cec12_raw(&shift.shifted(x));
    Evaluation::new(f, g, h)
}

/// Max-abs objective with `Σy² <= 100 D` and `cos f + sin f = 0`.
pub fn cec14(x: &[f64], shift: &ShiftSpec) -> Result<Evaluation, CopError> {
    let (f, g, h) = cec14_raw(&shift.shifted(x));
    Evaluation::new(f, g, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CecKind {
    Cec12,
    Cec14,
}

impl CecKind {
    pub fn name(self) -> &'static str {
        match self {
            CecKind::Cec12 => "cec12",
            CecKind::Cec14 => "cec14",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CecProblem {
    kind: CecKind,
    shift: ShiftSpec,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl CecProblem {
    pub fn new(kind: CecKind, shift: ShiftSpec) -> Self {
        let dim = shift.o.len();
        Self {
            kind,
            lower: vec![-shift.range; dim],
            upper: vec![shift.range; dim],
            shift,
        }
    }

    pub fn shift(&self) -> &ShiftSpec {
        &self.shift
    }
}

impl ConstrainedProblem for CecProblem {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn dim(&self) -> usize {
        self.shift.o.len()
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn n_ineq(&self) -> usize {
        1
    }

    fn n_eq(&self) -> usize {
        1
    }

    fn compute(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let y = self.shift.shifted(x);
        match self.kind {
            CecKind::Cec12 => cec12_raw(&y),
            CecKind::Cec14 => cec14_raw(&y),
        }
    }

    fn certified_feasible(&self) -> Option<Vec<f64>> {
        let d = self.dim();
        let y = match self.kind {
            // every |y_i| = 2/sqrt(D): Σy² = 4 and Σ|y| = 2 sqrt(D) >= 4 when D >= 4
            CecKind::Cec12 if d >= 4 => vec![2.0 / (d as f64).sqrt(); d],
            CecKind::Cec12 => return None,
            // max|y| = 3π/4 puts cos + sin at zero
            CecKind::Cec14 => {
                let mut y = vec![0.0; d];
                y[0] = 0.75 * PI;
                y
            }
        };
        Some(y.iter().zip(&self.shift.o).map(|(a, b)| a + b).collect())
    }
}
