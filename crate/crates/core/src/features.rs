//! Ten-dimensional observation of the population and run progress.
//!
//! | index | feature |
//! |-------|---------|
//! | 0 | std of search-box normalized coordinates, pooled over all members |
//! | 1 | std of objective values normalized by the run's best/worst |
//! | 2 | mean of normalized coordinates |
//! | 3 | mean of normalized objective values |
//! | 4 | population-best objective relative to generation 0 |
//! | 5 | top-5 violation mean relative to generation 0 |
//! | 6 | feasible fraction |
//! | 7 | consumed budget fraction |
//! | 8 | previous action level |
//! | 9 | fraction of member pairs where objective and violation move together |

use thiserror::Error;

use crate::cop::{is_feasible, DEFAULT_ACCURACY};
use crate::lshade::{Individual, Population};

pub const STATE_DIM: usize = 10;
/// Components zeroed by the constraint-feature ablation (S6, S7, S9, S10).
pub const CONSTRAINT_FEATURES: [usize; 4] = [5, 6, 8, 9];

const PROGRESS_CLIP: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cannot extract features from an empty population")]
    EmptyPopulation,
    #[error("bounds have {bounds} entries but members have {dim}")]
    Dimension { bounds: usize, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Zeroes S6, S7, S9 and S10.
pub fn mask_constraint_features(s: StateVector) -> StateVector {
    let mut out = s;
    for i in CONSTRAINT_FEATURES {
        out.0[i] = 0.0;
    }
    out
}

/// Mean of the `min(5, n)` smallest exact violations.
pub fn top5_violation_mean(members: &[Individual]) -> f64 {
    let mut nus: Vec<f64> = members.iter().map(|m| m.nu).collect();
    smallest_mean(&mut nus, 5)
}

fn smallest_mean(values: &mut [f64], k: usize) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let k = k.min(values.len());
    values[..k].iter().sum::<f64>() / k as f64
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Historical quantities the features and rewards are normalized by.
#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub f_gbest: f64,
    pub f_max: f64,
    pub f_pbest_0: f64,
    pub nu_top5_0: f64,
    pub nu_top5_prev: f64,
    pub nu_top5_now: f64,
    pub prev_action: f64,
    pub fes: u64,
    pub maxfes: u64,
}

impl RunHistory {
    /// Snapshot at generation 0. The previous action starts at the most
    /// relaxed level, 1.0.
    pub fn start(pop: &Population, fes: u64, maxfes: u64) -> Result<Self, FeatureError> {
        if pop.is_empty() {
            return Err(FeatureError::EmptyPopulation);
        }
        let f_min = pop.members.iter().map(Individual::f).fold(f64::INFINITY, f64::min);
        let f_max = pop.members.iter().map(Individual::f).fold(f64::NEG_INFINITY, f64::max);
        let nu0 = top5_violation_mean(&pop.members);
        Ok(Self {
            f_gbest: f_min,
            f_max,
            f_pbest_0: f_min,
            nu_top5_0: nu0,
            nu_top5_prev: nu0,
            nu_top5_now: nu0,
            prev_action: 1.0,
            fes,
            maxfes,
        })
    }

    /// Folds newly evaluated objective values into the historical extremes.
    pub fn observe(&mut self, objectives: impl IntoIterator<Item = f64>) {
        for f in objectives {
            self.f_gbest = self.f_gbest.min(f);
            self.f_max = self.f_max.max(f);
        }
    }

    /// Rolls the top-5 violation statistic forward after a generation.
    pub fn advance(&mut self, pop: &Population, action_level: f64, fes: u64) {
        self.nu_top5_prev = self.nu_top5_now;
        self.nu_top5_now = top5_violation_mean(&pop.members);
        self.prev_action = action_level.clamp(0.0, 1.0);
        self.fes = fes;
    }
}

/// Computes S1..S10 for the current population.
pub fn extract_state(
    pop: &Population,
    lower: &[f64],
    upper: &[f64],
    hist: &RunHistory,
) -> Result<StateVector, FeatureError> {
    let members = &pop.members;
    if members.is_empty() {
        return Err(FeatureError::EmptyPopulation);
    }
    let dim = members[0].x.len();
    if lower.len() != dim || upper.len() != dim {
        return Err(FeatureError::Dimension {
            bounds: lower.len(),
            dim,
        });
    }
    let n = members.len() as f64;
    let mut s = [0.0; STATE_DIM];

    let coords = members.iter().flat_map(|m| {
        m.x.iter()
            .enumerate()
            .map(|(j, &v)| (v - lower[j]) / (upper[j] - lower[j]))
    });
    let (coord_mean, coord_std) = mean_std(coords);
    s[0] = coord_std;
    s[2] = coord_mean;

    let range = hist.f_max - hist.f_gbest;
    if range > 0.0 {
        let normed = members.iter().map(|m| (m.f() - hist.f_gbest) / range);
        let (m, sd) = mean_std(normed);
        s[1] = sd;
        s[3] = m;
    }

    let f_pbest = members.iter().map(Individual::f).fold(f64::INFINITY, f64::min);
    s[4] = if hist.f_pbest_0.abs() < 1e-12 {
        1.0
    } else {
        (f_pbest / hist.f_pbest_0).clamp(-PROGRESS_CLIP, PROGRESS_CLIP)
    };

    s[5] = if hist.nu_top5_0 > 0.0 {
        top5_violation_mean(members) / hist.nu_top5_0
    } else {
        0.0
    };

    let feasible = members
        .iter()
        .filter(|m| is_feasible(&m.eval, DEFAULT_ACCURACY))
        .count();
    s[6] = feasible as f64 / n;
    s[7] = if hist.maxfes > 0 {
        (hist.fes as f64 / hist.maxfes as f64).min(1.0)
    } else {
        0.0
    };
    s[8] = hist.prev_action;
    s[9] = tradeoff_fraction(members);

    debug_assert!(s.iter().all(|v| v.is_finite()));
    Ok(StateVector(s))
}

/// Fraction of unordered pairs whose objective and exact-violation
/// differences share a sign. Pairs with equal violation count as zero.
pub fn tradeoff_fraction(members: &[Individual]) -> f64 {
    let n = members.len();
    if n < 2 {
        return 0.0;
    }
    let mut positive = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let dnu = members[i].nu - members[j].nu;
            let df = members[i].f() - members[j].f();
            if dnu != 0.0 && df != 0.0 && (dnu > 0.0) == (df > 0.0) {
                positive += 1;
            }
        }
    }
    positive as f64 / (n * (n - 1) / 2) as f64
}
