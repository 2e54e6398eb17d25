//! Result files: CSV tables, JSON-lines traces and normalized curves.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::run::{RunRecord, SummaryRow};
use super::HarnessError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(|e| HarnessError::Csv {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Csv {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| HarnessError::Csv {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    write_csv(path, rows)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })?);
    }
    Ok(out)
}

/// One generation of one run, flattened for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub problem: String,
    pub dim: usize,
    pub method: String,
    pub run: usize,
    pub step: usize,
    pub fes: u64,
    pub sco: f64,
    pub level: f64,
    pub eps_mean: f64,
    pub reward: f64,
}

/// Mean normalized SCO of one method at one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub problem: String,
    pub dim: usize,
    pub method: String,
    pub step: usize,
    pub fes: u64,
    pub normalized_sco: f64,
    pub runs: usize,
}

pub fn curve_points(records: &[RunRecord]) -> Vec<CurvePoint> {
    records
        .iter()
        .flat_map(|r| {
            r.generations.iter().map(move |g| CurvePoint {
                problem: r.problem.clone(),
                dim: r.dim,
                method: r.method.clone(),
                run: r.run,
                step: g.step,
                fes: g.fes,
                sco: g.sco,
                level: g.level,
                eps_mean: g.eps_mean,
                reward: g.reward,
            })
        })
        .collect()
}

/// Min-max normalizes SCO per (problem, dim), with bounds pooled over all
/// methods and runs, then averages per method and generation. A zero range
/// maps everything to 0.
pub fn normalized_curves(records: &[RunRecord]) -> Vec<CurveRow> {
    let mut bounds: BTreeMap<(&str, usize), (f64, f64)> = BTreeMap::new();
    for r in records {
        let b = bounds
            .entry((&r.problem, r.dim))
            .or_insert((f64::INFINITY, f64::NEG_INFINITY));
        for g in &r.generations {
            b.0 = b.0.min(g.sco);
            b.1 = b.1.max(g.sco);
        }
    }
    type Key<'a> = (&'a str, usize, &'a str, usize);
    // value: (fes, sum, count)
    let mut acc: BTreeMap<Key<'_>, (u64, f64, usize)> = BTreeMap::new();
    for r in records {
        let (lo, hi) = bounds[&(r.problem.as_str(), r.dim)];
        let range = hi - lo;
        for g in &r.generations {
            let v = if range > 0.0 { (g.sco - lo) / range } else { 0.0 };
            let e = acc
                .entry((&r.problem, r.dim, &r.method, g.step))
                .or_insert((g.fes, 0.0, 0));
            e.1 += v;
            e.2 += 1;
        }
    }
    acc.into_iter()
        .map(|((problem, dim, method, step), (fes, sum, n))| CurveRow {
            problem: problem.to_string(),
            dim,
            method: method.to_string(),
            step,
            fes,
            normalized_sco: sum / n as f64,
            runs: n,
        })
        .collect()
}

/// Writes `curves.jsonl` and `curves.csv` into `dir`.
pub fn export_curves(records: &[RunRecord], dir: &Path) -> Result<(PathBuf, PathBuf), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Config("no run records to export".into()));
    }
    let jsonl = dir.join("curves.jsonl");
    let csv = dir.join("curves.csv");
    write_jsonl(&jsonl, &curve_points(records))?;
    write_csv(&csv, &normalized_curves(records))?;
    Ok((jsonl, csv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::StepTrace;

    fn record(method: &str, run: usize, scos: &[f64]) -> RunRecord {
        RunRecord {
            problem: "p".into(),
            dim: 10,
            method: method.into(),
            run,
            seed: 0,
            final_sco: *scos.last().unwrap(),
            generations: scos
                .iter()
                .enumerate()
                .map(|(i, &sco)| StepTrace {
                    step: i + 1,
                    fes: 100 + 50 * i as u64,
                    level: 0.5,
                    eps_min: 0.0,
                    eps_mean: 0.0,
                    eps_max: 0.0,
                    reward: 0.0,
                    sco,
                })
                .collect(),
        }
    }

    #[test]
    fn constant_curve_normalizes_to_zero() {
        let rows = normalized_curves(&[record("a", 0, &[3.0, 3.0, 3.0])]);
        assert!(rows.iter().all(|r| r.normalized_sco == 0.0));
        assert!(rows.windows(2).all(|w| w[0].fes < w[1].fes));
    }

    #[test]
    fn bounds_are_shared_across_methods() {
        let rows = normalized_curves(&[record("a", 0, &[10.0, 6.0]), record("b", 0, &[8.0, 2.0])]);
        let get = |m: &str, s: usize| {
            rows.iter()
                .find(|r| r.method == m && r.step == s)
                .unwrap()
                .normalized_sco
        };
        assert_eq!(get("a", 1), 1.0);
        assert_eq!(get("a", 2), 0.5);
        assert_eq!(get("b", 1), 0.75);
        assert_eq!(get("b", 2), 0.0);
    }

    #[test]
    fn export_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![record("a", 0, &[2.0, 1.0]), record("a", 1, &[4.0, 1.0])];
        let (jsonl, csv) = export_curves(&recs, dir.path()).unwrap();
        let points: Vec<CurvePoint> = read_jsonl(&jsonl).unwrap();
        assert_eq!(points.len(), 4);
        let rows: Vec<CurveRow> = read_csv(&csv).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].runs, 2);
        assert!(export_curves(&[], dir.path()).is_err());
        let path = dir.path().join("runs.jsonl");
        write_jsonl(&path, &recs).unwrap();
        let back: Vec<RunRecord> = read_jsonl(&path).unwrap();
        assert_eq!(back, recs);
    }
}
