//! Seeded synthetic constrained problems used as a training distribution.
//!
//! Each kind pairs a classic objective with a constraint family whose
//! feasible region contains a point known by construction. The seed drives
//! the shift and the constraint offsets.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use super::cec::{ShiftSpec, SEARCH_RANGE};
use super::ProblemError;
use crate::cop::ConstrainedProblem;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SyntheticKind {
    SphereLinear,
    RosenbrockCubic,
    RastriginRing,
    AckleyEllipsoid,
    GriewankPlane,
    SchwefelBand,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 6] = [
        SyntheticKind::SphereLinear,
        SyntheticKind::RosenbrockCubic,
        SyntheticKind::RastriginRing,
        SyntheticKind::AckleyEllipsoid,
        SyntheticKind::GriewankPlane,
        SyntheticKind::SchwefelBand,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticKind::SphereLinear => "sphere-linear",
            SyntheticKind::RosenbrockCubic => "rosenbrock-cubic",
            SyntheticKind::RastriginRing => "rastrigin-ring",
            SyntheticKind::AckleyEllipsoid => "ackley-ellipsoid",
            SyntheticKind::GriewankPlane => "griewank-plane",
            SyntheticKind::SchwefelBand => "schwefel-band",
        }
    }

    fn tag(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SyntheticKind {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ProblemError::UnknownKind(s.to_string()))
    }
}

/// Seed-dependent constants of a synthetic instance.
#[derive(Debug, Clone)]
enum Params {
    SphereLinear,
    RosenbrockCubic { cap: f64 },
    RastriginRing { radius: f64 },
    AckleyEllipsoid { center: Vec<f64>, radius: f64 },
    GriewankPlane { normal: Vec<f64>, offset: f64, radius: f64 },
    SchwefelBand { lo: f64, hi: f64 },
}

#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    name: String,
    kind: SyntheticKind,
    shift: ShiftSpec,
    params: Params,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Builds the deterministic instance `(kind, seed)` at `dim`.
pub fn synthetic_family(seed: u64, dim: usize, kind: SyntheticKind) -> SyntheticProblem {
    let mut rng = seed::rng(seed::derive(seed, "synthetic", &[kind.tag(), dim as u64]));
    let o: Vec<f64> = (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect();
    let params = match kind {
        SyntheticKind::SphereLinear => Params::SphereLinear,
        SyntheticKind::RosenbrockCubic => Params::RosenbrockCubic {
            cap: rng.random_range(0.2..0.8),
        },
        SyntheticKind::RastriginRing => Params::RastriginRing {
            radius: rng.random_range(1.0..3.0),
        },
        SyntheticKind::AckleyEllipsoid => Params::AckleyEllipsoid {
            center: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            radius: rng.random_range(0.5..1.5),
        },
        SyntheticKind::GriewankPlane => {
            let normal: Vec<f64> = (0..dim)
                .map(|_| {
                    let v: f64 = rng.random_range(0.5..1.5);
                    if rng.random_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            let offset = rng.random_range(-5.0..5.0);
            let norm2: f64 = normal.iter().map(|a| a * a).sum();
            // the plane point closest to the origin has squared norm offset²/|a|²
            let radius = (4.0 * offset * offset / norm2 + 1.0).sqrt();
            Params::GriewankPlane {
                normal,
                offset,
                radius,
            }
        }
        SyntheticKind::SchwefelBand => {
            let lo = rng.random_range(0.5..1.5);
            let hi = lo + rng.random_range(0.1..0.5);
            Params::SchwefelBand { lo, hi }
        }
    };
    SyntheticProblem {
        name: format!("synthetic/{kind}/{seed}"),
        kind,
        shift: ShiftSpec {
            o,
            range: SEARCH_RANGE,
        },
        params,
        lower: vec![-SEARCH_RANGE; dim],
        upper: vec![SEARCH_RANGE; dim],
    }
}

impl SyntheticProblem {
    pub fn kind(&self) -> SyntheticKind {
        self.kind
    }

    /// Replaces the seeded shift, e.g. with one loaded from a data file.
    pub fn with_shift(mut self, shift: ShiftSpec) -> Self {
        self.shift = shift;
        self
    }

    fn certified_y(&self) -> Vec<f64> {
        let d = self.shift.o.len();
        match &self.params {
            Params::SphereLinear => {
                let mut y = vec![0.0; d];
                y[0] = 1.0;
                y
            }
            Params::RosenbrockCubic { .. } => vec![0.0; d],
            Params::RastriginRing { radius } => {
                let mut y = vec![0.0; d];
                y[0] = *radius;
                y
            }
            Params::AckleyEllipsoid { center, .. } => center.clone(),
            Params::GriewankPlane { normal, offset, .. } => {
                let norm2: f64 = normal.iter().map(|a| a * a).sum();
                normal.iter().map(|a| offset * a / norm2).collect()
            }
            Params::SchwefelBand { lo, hi } => vec![0.5 * (lo + hi); d],
        }
    }
}

fn sphere(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum()
}

fn rosenbrock(y: &[f64]) -> f64 {
    if y.len() == 1 {
        return (y[0] - 1.0).powi(2);
    }
    y.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

fn rastrigin(y: &[f64]) -> f64 {
    use std::f64::consts::PI;
    y.iter()
        .map(|v| v * v - 10.0 * (2.0 * PI * v).cos() + 10.0)
        .sum()
}

fn ackley(y: &[f64]) -> f64 {
    use std::f64::consts::{E, PI};
    let n = y.len() as f64;
    let s1 = y.iter().map(|v| v * v).sum::<f64>() / n;
    let s2 = y.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * s1.sqrt()).exp() - s2.exp() + 20.0 + E
}

fn griewank(y: &[f64]) -> f64 {
    let s = y.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let p: f64 = y
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .product();
    s - p + 1.0
}

fn schwefel_12(y: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut total = 0.0;
    for v in y {
        acc += v;
        total += acc * acc;
    }
    total
}

impl ConstrainedProblem for SyntheticProblem {
    fn name(&self) -> &str {
        &self.name
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
        match self.params {
            Params::RosenbrockCubic { .. } | Params::SchwefelBand { .. } => 2,
            _ => 1,
        }
    }

    fn n_eq(&self) -> usize {
        match self.params {
            Params::RastriginRing { .. } | Params::GriewankPlane { .. } => 1,
            _ => 0,
        }
    }

    fn compute(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let y = self.shift.shifted(x);
        let d = y.len() as f64;
        match &self.params {
            Params::SphereLinear => (sphere(&y), vec![1.0 - y.iter().sum::<f64>()], vec![]),
            Params::RosenbrockCubic { cap } => {
                let cubic = y.iter().map(|v| v * v * v).sum::<f64>() / d;
                let mean = y.iter().sum::<f64>() / d;
                (rosenbrock(&y), vec![cubic - cap, -mean - 1.0], vec![])
            }
            Params::RastriginRing { radius } => (
                rastrigin(&y),
                vec![-y[0]],
                vec![sphere(&y) - radius * radius],
            ),
            Params::AckleyEllipsoid { center, radius } => {
                let e = y
                    .iter()
                    .zip(center)
                    .enumerate()
                    .map(|(i, (v, c))| (i + 1) as f64 * (v - c).powi(2))
                    .sum::<f64>()
                    / d;
                (ackley(&y), vec![e - radius * radius], vec![])
            }
            Params::GriewankPlane {
                normal,
                offset,
                radius,
            } => {
                let dot: f64 = normal.iter().zip(&y).map(|(a, v)| a * v).sum();
                (
                    griewank(&y),
                    vec![sphere(&y) - radius * radius],
                    vec![dot - offset],
                )
            }
            Params::SchwefelBand { lo, hi } => {
                let mean = y.iter().sum::<f64>() / d;
                (schwefel_12(&y), vec![lo - mean, mean - hi], vec![])
            }
        }
    }

    fn certified_feasible(&self) -> Option<Vec<f64>> {
        Some(
            self.certified_y()
                .iter()
                .zip(&self.shift.o)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}
