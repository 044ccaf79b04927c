// SPDX-License-Identifier: Apache-2.0

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::metrics::{js_divergence, policy_diff, PolicyDiff};
use crate::table::{read_policy_csv, ValueTable};

use super::{HarnessError, RunManifest, Task};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDelta {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub task: Task,
    pub a: PathBuf,
    pub b: PathBuf,
    /// Jensen-Shannon divergence between the final value tables, in bits.
    pub jsd: f64,
    pub policy_diff: PolicyDiff,
    /// Summary metrics present in both runs, `delta = a - b`.
    pub deltas: Vec<MetricDelta>,
}

fn open(path: &Path) -> Result<File, HarnessError> {
    File::open(path).map_err(|e| HarnessError::io(path, e))
}

/// Compares two run directories of the same task.
pub fn compare(a: &Path, b: &Path) -> Result<Comparison, HarnessError> {
    let ma = RunManifest::read(a)?;
    let mb = RunManifest::read(b)?;
    if ma.config.task != mb.config.task {
        return Err(HarnessError::Mismatch(format!("task {} vs {}", ma.config.task, mb.config.task)));
    }
    let va = ValueTable::read_csv(open(&a.join("values.csv"))?)?;
    let vb = ValueTable::read_csv(open(&b.join("values.csv"))?)?;
    va.same_shape(&vb)?;
    let pa = read_policy_csv(open(&a.join("policy.csv"))?)?;
    let pb = read_policy_csv(open(&b.join("policy.csv"))?)?;
    let jsd = js_divergence(&va, &vb).map_err(|e| HarnessError::Mismatch(e.to_string()))?;
    let policy_diff = policy_diff(&pa, &pb).map_err(|e| HarnessError::Mismatch(e.to_string()))?;
    let deltas = ma
        .summary
        .iter()
        .filter_map(|(k, &x)| mb.summary.get(k).map(|&y| MetricDelta { metric: k.clone(), a: x, b: y, delta: x - y }))
        .collect();
    Ok(Comparison { task: ma.config.task, a: a.to_path_buf(), b: b.to_path_buf(), jsd, policy_diff, deltas })
}

/// Writes `comparison.json` and `comparison.csv` (`metric,a,b,delta`) into `dir`.
pub fn write_comparison(c: &Comparison, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let json = dir.join("comparison.json");
    let mut text = serde_json::to_string_pretty(c).map_err(|e| HarnessError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&json, text).map_err(|e| HarnessError::io(&json, e))?;

    let csv_path = dir.join("comparison.csv");
    let mut w = csv::Writer::from_writer(File::create(&csv_path).map_err(|e| HarnessError::io(&csv_path, e))?);
    let io = |e: csv::Error| HarnessError::Io(e.to_string());
    w.write_record(["metric", "a", "b", "delta"]).map_err(io)?;
    w.write_record(["jsd", "", "", &c.jsd.to_string()]).map_err(io)?;
    w.write_record(["policy_disagreement", "", "", &c.policy_diff.fraction.to_string()]).map_err(io)?;
    for d in &c.deltas {
        w.write_record([d.metric.clone(), d.a.to_string(), d.b.to_string(), d.delta.to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(vec![json, csv_path])
}
