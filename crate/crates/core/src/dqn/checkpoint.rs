//! Versioned text checkpoints.
//!
//! ```text
//! rleceo-ckpt v1
//! shapes 10 64 11
//! action_scheme=exponential reward=full seed=7 epochs=50 ... f_agentbest.cec12=1.5e2
//! <W1 row-major, b1, W2 row-major, b2: one value per line>
//! ```
//!
//! Values are written with 17 significant digits so loading is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use super::agent::TrainConfig;
use super::network::{NetworkParams, Shape};
use crate::env::{ActionScheme, RewardVariant};
use crate::seed::fnv1a;

pub const MAGIC: &str = "rleceo-ckpt";
pub const VERSION: &str = "v1";
const AGENTBEST_PREFIX: &str = "f_agentbest.";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported checkpoint version `{0}` (expected `{MAGIC} {VERSION}`)")]
    Version(String),
    #[error("checkpoint shape {found:?} does not match expected {expected:?}")]
    Shape { expected: Shape, found: Shape },
    #[error("checkpoint line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("checkpoint metadata: {0}")]
    Metadata(String),
}

/// Everything needed to reproduce or validate a trained policy.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub action_scheme: ActionScheme,
    pub reward: RewardVariant,
    pub seed: u64,
    pub epochs: usize,
    pub problem_hash: u64,
    pub train: TrainConfig,
    /// Best objective seen per training problem.
    pub f_agentbest: BTreeMap<String, f64>,
}

/// Order-independent hash of a training problem set.
pub fn problem_set_hash<S: AsRef<str>>(names: &[S]) -> u64 {
    let mut sorted: Vec<&str> = names.iter().map(AsRef::as_ref).collect();
    sorted.sort_unstable();
    sorted.dedup();
    fnv1a(sorted.join("\n").as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let shape = self.params.shape();
        let m = &self.meta;
        let t = &m.train;
        let mut out = format!("{MAGIC} {VERSION}\n");
        let _ = writeln!(out, "shapes {} {} {}", shape.n_in, shape.n_hidden, shape.n_out);
        let mut pairs = vec![
            ("action_scheme".to_string(), m.action_scheme.as_str().to_string()),
            ("reward".into(), m.reward.as_str().into()),
            ("seed".into(), m.seed.to_string()),
            ("epochs".into(), m.epochs.to_string()),
            ("problem_hash".into(), format!("{:016x}", m.problem_hash)),
            ("max_epoch".into(), t.max_epoch.to_string()),
            ("lr_start".into(), format!("{:e}", t.lr_start)),
            ("lr_end".into(), format!("{:e}", t.lr_end)),
            ("discount".into(), format!("{:e}", t.discount)),
            ("target_sync".into(), t.target_sync.to_string()),
            ("explore_start".into(), format!("{:e}", t.explore_start)),
            ("explore_end".into(), format!("{:e}", t.explore_end)),
            ("explore_fraction".into(), format!("{:e}", t.explore_fraction)),
            ("buffer_capacity".into(), t.buffer_capacity.to_string()),
            ("batch_size".into(), t.batch_size.to_string()),
        ];
        for (name, v) in &m.f_agentbest {
            pairs.push((format!("{AGENTBEST_PREFIX}{name}"), format!("{v:e}")));
        }
        let line: Vec<String> = pairs.into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
        for v in self.params.params() {
            let _ = writeln!(out, "{v:.16e}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CheckpointError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header.trim() != format!("{MAGIC} {VERSION}") {
            return Err(CheckpointError::Version(header.to_string()));
        }
        let shape = parse_shape(lines.next().ok_or_else(|| truncated(2))?)?;
        let meta = parse_meta(lines.next().ok_or_else(|| truncated(3))?)?;

        let expected = shape.n_params();
        let mut values = Vec::with_capacity(expected);
        for (i, raw) in lines.enumerate() {
            let line = i + 4;
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            if values.len() == expected {
                return Err(CheckpointError::Parse {
                    line,
                    msg: format!("more than {expected} parameter values"),
                });
            }
            let v: f64 = raw.parse().map_err(|e| CheckpointError::Parse {
                line,
                msg: format!("`{raw}`: {e}"),
            })?;
            if !v.is_finite() {
                return Err(CheckpointError::Parse {
                    line,
                    msg: "non-finite parameter".into(),
                });
            }
            values.push(v);
        }
        if values.len() != expected {
            return Err(CheckpointError::Parse {
                line: 3 + values.len() + 1,
                msg: format!("truncated: {} of {expected} parameter values", values.len()),
            });
        }
        let params = NetworkParams::from_flat(shape, &values).map_err(|e| CheckpointError::Parse {
            line: 2,
            msg: e.to_string(),
        })?;
        Ok(Self { params, meta })
    }

    /// Writes through a temporary file in the target directory, then
    /// renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(self.to_text().as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| CheckpointError::Io(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Rejects checkpoints trained for a different action space.
    pub fn expect_scheme(&self, scheme: ActionScheme) -> Result<(), CheckpointError> {
        let found = self.params.shape();
        let expected = Shape::new(found.n_in, found.n_hidden, scheme.n_actions());
        if found != expected {
            return Err(CheckpointError::Shape { expected, found });
        }
        if self.meta.action_scheme != scheme {
            return Err(CheckpointError::Metadata(format!(
                "checkpoint uses action scheme `{}`, requested `{}`",
                self.meta.action_scheme.as_str(),
                scheme.as_str()
            )));
        }
        Ok(())
    }
}

fn truncated(line: usize) -> CheckpointError {
    CheckpointError::Parse {
        line,
        msg: "unexpected end of file".into(),
    }
}

fn parse_shape(line: &str) -> Result<Shape, CheckpointError> {
    let err = |msg: String| CheckpointError::Parse { line: 2, msg };
    let mut it = line.split_whitespace();
    if it.next() != Some("shapes") {
        return Err(err(format!("expected `shapes a b c`, got `{line}`")));
    }
    let dims = it
        .map(|t| t.parse::<usize>().map_err(|e| err(format!("`{t}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    match dims[..] {
        [a, b, c] if a > 0 && b > 0 && c > 0 => Ok(Shape::new(a, b, c)),
        _ => Err(err(format!("expected three positive sizes, got `{line}`"))),
    }
}

fn parse_meta(line: &str) -> Result<CheckpointMeta, CheckpointError> {
    let mut map: BTreeMap<&str, &str> = BTreeMap::new();
    let mut agentbest = BTreeMap::new();
    for pair in line.split_whitespace() {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CheckpointError::Metadata(format!("`{pair}` is not key=value")))?;
        if let Some(name) = k.strip_prefix(AGENTBEST_PREFIX) {
            agentbest.insert(name.to_string(), parse_value(k, v)?);
        } else if map.insert(k, v).is_some() {
            return Err(CheckpointError::Metadata(format!("duplicate key `{k}`")));
        }
    }
    let mut take = |k: &str| {
        map.remove(k)
            .ok_or_else(|| CheckpointError::Metadata(format!("missing key `{k}`")))
    };
    let action_scheme = take("action_scheme")?
        .parse::<ActionScheme>()
        .map_err(CheckpointError::Metadata)?;
    let reward = take("reward")?
        .parse::<RewardVariant>()
        .map_err(CheckpointError::Metadata)?;
    let seed = parse_value("seed", take("seed")?)?;
    let epochs = parse_value("epochs", take("epochs")?)?;
    let hash = take("problem_hash")?;
    let problem_hash = u64::from_str_radix(hash, 16)
        .map_err(|e| CheckpointError::Metadata(format!("problem_hash `{hash}`: {e}")))?;
    let train = TrainConfig {
        max_epoch: parse_value("max_epoch", take("max_epoch")?)?,
        lr_start: parse_value("lr_start", take("lr_start")?)?,
        lr_end: parse_value("lr_end", take("lr_end")?)?,
        discount: parse_value("discount", take("discount")?)?,
        target_sync: parse_value("target_sync", take("target_sync")?)?,
        explore_start: parse_value("explore_start", take("explore_start")?)?,
        explore_end: parse_value("explore_end", take("explore_end")?)?,
        explore_fraction: parse_value("explore_fraction", take("explore_fraction")?)?,
        buffer_capacity: parse_value("buffer_capacity", take("buffer_capacity")?)?,
        batch_size: parse_value("batch_size", take("batch_size")?)?,
    };
    if let Some(k) = map.keys().next() {
        return Err(CheckpointError::Metadata(format!("unknown key `{k}`")));
    }
    Ok(CheckpointMeta {
        action_scheme,
        reward,
        seed,
        epochs,
        problem_hash,
        train,
        f_agentbest: agentbest,
    })
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CheckpointError>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| CheckpointError::Metadata(format!("`{key}={v}`: {e}")))
}
