//! Benchmark problems and the name → problem registry.
//!
//! Registered names:
//! - `cec12`, `cec14` at D ∈ {10, 30, 50, 100}
//! - `sphere`, an unconstrained shifted sphere (any D ≥ 1)
//! - `synthetic/<kind>/<seed>` for the six synthetic families (2 ≤ D ≤ 1000)
//!
//! Shifts default to a pseudo-random vector in `[-50, 50]^D` drawn from a
//! seed named after the problem; a shift data file can override them.

pub mod cec;
pub mod synthetic;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use thiserror::Error;

pub use cec::{cec12, cec14, CecKind, CecProblem, ShiftSpec, SEARCH_RANGE};
pub use synthetic::{synthetic_family, SyntheticKind, SyntheticProblem};

use crate::cop::{ConstrainedProblem, CopError, ProblemRef};
use crate::seed;

pub const CEC_DIMS: [usize; 4] = [10, 30, 50, 100];
const SYNTHETIC_DIMS: std::ops::RangeInclusive<usize> = 2..=1000;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown problem `{name}`; valid names: {valid}")]
    UnknownName { name: String, valid: String },
    #[error("problem `{name}` does not support dimension {dim} (supported: {supported})")]
    UnsupportedDim {
        name: String,
        dim: usize,
        supported: String,
    },
    #[error("unknown synthetic kind `{0}`")]
    UnknownKind(String),
    #[error("shift file line {line}: {msg}")]
    ShiftFile { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Cop(#[from] CopError),
}

fn valid_names() -> String {
    let kinds: Vec<_> = SyntheticKind::ALL.iter().map(|k| k.as_str()).collect();
    format!(
        "cec12, cec14, sphere, synthetic/<kind>/<seed> with kind in {{{}}}",
        kinds.join(", ")
    )
}

/// Unconstrained shifted sphere.
#[derive(Debug, Clone)]
pub struct Sphere {
    shift: ShiftSpec,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Sphere {
    pub fn new(shift: ShiftSpec) -> Self {
        let d = shift.o.len();
        Self {
            lower: vec![-shift.range; d],
            upper: vec![shift.range; d],
            shift,
        }
    }
}

impl ConstrainedProblem for Sphere {
    fn name(&self) -> &str {
        "sphere"
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
        0
    }
    fn n_eq(&self) -> usize {
        0
    }
    fn compute(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let f = x.iter().zip(&self.shift.o).map(|(a, b)| (a - b).powi(2)).sum();
        (f, vec![], vec![])
    }
    fn certified_feasible(&self) -> Option<Vec<f64>> {
        Some(self.shift.o.clone())
    }
}

/// Parsed form of a registry name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Entry {
    Cec(CecKind),
    Sphere,
    Synthetic(SyntheticKind, u64),
}

fn parse_name(name: &str) -> Result<Entry, ProblemError> {
    let unknown = || ProblemError::UnknownName {
        name: name.to_string(),
        valid: valid_names(),
    };
    match name {
        "cec12" => return Ok(Entry::Cec(CecKind::Cec12)),
        "cec14" => return Ok(Entry::Cec(CecKind::Cec14)),
        "sphere" => return Ok(Entry::Sphere),
        _ => {}
    }
    let mut parts = name.split('/');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("synthetic"), Some(kind), Some(seed), None) => {
            let kind = kind.parse().map_err(|_| unknown())?;
            let seed = seed.parse().map_err(|_| unknown())?;
            Ok(Entry::Synthetic(kind, seed))
        }
        _ => Err(unknown()),
    }
}

/// Default shift for `name` at `dim`, uniform in `[-50, 50]^dim`.
pub fn default_shift(name: &str, dim: usize) -> ShiftSpec {
    let mut rng = seed::rng(seed::derive(0, &format!("shift/{name}"), &[dim as u64]));
    ShiftSpec {
        o: (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect(),
        range: SEARCH_RANGE,
    }
}

/// Name → problem lookup with optional shift overrides.
#[derive(Debug, Clone, Default)]
pub struct ProblemRegistry {
    shifts: BTreeMap<(String, usize), Vec<f64>>,
}

impl ProblemRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads shift overrides from a data file (see [`parse_shift_file`]).
    pub fn with_shift_file(path: &Path) -> Result<Self, ProblemError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self {
            shifts: parse_shift_file(&text)?,
        })
    }

    pub fn insert_shift(&mut self, name: &str, shift: Vec<f64>) {
        self.shifts.insert((name.to_string(), shift.len()), shift);
    }

    pub fn supports(&self, name: &str, dim: usize) -> Result<(), ProblemError> {
        let entry = parse_name(name)?;
        let (ok, supported) = match entry {
            Entry::Cec(_) => (CEC_DIMS.contains(&dim), "10, 30, 50, 100".to_string()),
            Entry::Sphere => (dim >= 1, ">= 1".to_string()),
            Entry::Synthetic(..) => (
                SYNTHETIC_DIMS.contains(&dim),
                format!("{}..={}", SYNTHETIC_DIMS.start(), SYNTHETIC_DIMS.end()),
            ),
        };
        if ok {
            Ok(())
        } else {
            Err(ProblemError::UnsupportedDim {
                name: name.to_string(),
                dim,
                supported,
            })
        }
    }

    pub fn lookup(&self, name: &str, dim: usize) -> Result<ProblemRef, ProblemError> {
        self.supports(name, dim)?;
        let shift = match self.shifts.get(&(name.to_string(), dim)) {
            Some(o) => Some(ShiftSpec::new(o.clone(), SEARCH_RANGE)?),
            None => None,
        };
        let problem: ProblemRef = match parse_name(name)? {
            Entry::Cec(kind) => Arc::new(CecProblem::new(
                kind,
                shift.unwrap_or_else(|| default_shift(name, dim)),
            )),
            Entry::Sphere => Arc::new(Sphere::new(
                shift.unwrap_or_else(|| default_shift(name, dim)),
            )),
            Entry::Synthetic(kind, seed) => {
                let p = synthetic_family(seed, dim, kind);
                Arc::new(match shift {
                    Some(s) => p.with_shift(s),
                    None => p,
                })
            }
        };
        Ok(problem)
    }
}

/// Looks up `name` at `dim` in the default registry.
pub fn registry_lookup(name: &str, dim: usize) -> Result<ProblemRef, ProblemError> {
    ProblemRegistry::new().lookup(name, dim)
}

/// Parses shift data: blocks of a `name dim` line followed by a line of
/// `dim` space-separated values. Blank lines and `#` comments are skipped.
pub fn parse_shift_file(text: &str) -> Result<BTreeMap<(String, usize), Vec<f64>>, ProblemError> {
    let mut out = BTreeMap::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    while let Some((line, header)) = lines.next() {
        let err = |msg: String| ProblemError::ShiftFile { line, msg };
        let mut it = header.split_whitespace();
        let (name, dim) = match (it.next(), it.next(), it.next()) {
            (Some(n), Some(d), None) => (
                n.to_string(),
                d.parse::<usize>()
                    .map_err(|e| err(format!("bad dimension `{d}`: {e}")))?,
            ),
            _ => return Err(err(format!("expected `name dim`, got `{header}`"))),
        };
        let (vline, values) = lines
            .next()
            .ok_or_else(|| err(format!("missing shift values for `{name}`")))?;
        let o = values
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ProblemError::ShiftFile {
                line: vline,
                msg: e.to_string(),
            })?;
        if o.len() != dim {
            return Err(ProblemError::ShiftFile {
                line: vline,
                msg: format!("expected {dim} values, got {}", o.len()),
            });
        }
        out.insert((name, dim), o);
    }
    Ok(out)
}
