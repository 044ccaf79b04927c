// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::seed::replication_seed;

use super::{execute, prepare_dir, write_output, ExperimentConfig, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    #[serde(rename = "T")]
    Window,
    #[serde(rename = "epsilon")]
    Epsilon,
    #[serde(rename = "theta")]
    Theta,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Window => "T",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Theta => "theta",
        }
    }

    /// `base` with the parameter set to `value`.
    pub fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig, HarnessError> {
        let mut c = base.clone();
        let integral = || {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as u32)
            } else {
                Err(HarnessError::Config(format!("{} must be a positive integer, got {value}", self.as_str())))
            }
        };
        match self {
            SweepParam::Window => c.window = integral()? as usize,
            SweepParam::Theta => c.theta = Some(integral()?),
            SweepParam::Epsilon => c.epsilon = Some(value),
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" | "window" => Ok(SweepParam::Window),
            "epsilon" | "eps" => Ok(SweepParam::Epsilon),
            "theta" => Ok(SweepParam::Theta),
            other => Err(HarnessError::Config(format!("unknown sweep parameter {other:?} (T, epsilon, theta)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub param: SweepParam,
    pub values: Vec<f64>,
    /// Replicates per value; replicate `k` runs with
    /// [`replication_seed`]`(base.seed, k)`.
    pub seeds: u64,
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    pub replicate: u64,
    pub seed: u64,
    pub summary: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Mean and sample standard deviation of one metric at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub entries: Vec<SweepEntry>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, value: f64, metric: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.value == value && r.metric == metric)
    }

    pub fn write_summary_csv<W: std::io::Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["param", "value", "metric", "mean", "std", "n"]).map_err(csv_err)?;
        for r in &self.rows {
            wtr.write_record([
                self.param.as_str().to_string(),
                r.value.to_string(),
                r.metric.clone(),
                r.mean.to_string(),
                r.std.to_string(),
                r.n.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Io(e.to_string())
}

fn entry_dir(root: &Path, param: SweepParam, value: f64, replicate: u64) -> PathBuf {
    root.join(format!("{param}={value}")).join(format!("seed{replicate}"))
}

/// Runs every (value, replicate) pair in parallel. With `out`, each run is
/// written to `out/<param>=<value>/seed<k>/` and the summary to
/// `out/sweep_summary.csv`.
pub fn sweep(spec: &SweepSpec, out: Option<&Path>, force: bool) -> Result<SweepReport, HarnessError> {
    if spec.values.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one value".into()));
    }
    if spec.seeds == 0 {
        return Err(HarnessError::Config("sweep needs at least one seed".into()));
    }
    let mut jobs = Vec::new();
    for &value in &spec.values {
        let cfg = spec.param.apply(&spec.base, value)?;
        for k in 0..spec.seeds {
            let seed = replication_seed(spec.base.seed, k);
            jobs.push((value, k, ExperimentConfig { seed, ..cfg.clone() }));
        }
    }
    if let Some(root) = out {
        prepare_dir(root, force)?;
    }

    let work = || -> Result<Vec<SweepEntry>, HarnessError> {
        jobs.par_iter()
            .map(|(value, k, cfg)| {
                let output = execute(cfg)?;
                let dir = match out {
                    Some(root) => {
                        let d = entry_dir(root, spec.param, *value, *k);
                        write_output(&output, &d, force)?;
                        Some(d)
                    }
                    None => None,
                };
                Ok(SweepEntry { value: *value, replicate: *k, seed: cfg.seed, summary: output.summary, dir })
            })
            .collect()
    };
    let entries = match spec.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let mut rows = Vec::new();
    for &value in &spec.values {
        let group: Vec<&SweepEntry> = entries.iter().filter(|e| e.value == value).collect();
        let mut metrics: Vec<&String> = group.iter().flat_map(|e| e.summary.keys()).collect();
        metrics.sort();
        metrics.dedup();
        for metric in metrics {
            let xs: Vec<f64> = group.iter().filter_map(|e| e.summary.get(metric).copied()).collect();
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
            rows.push(SweepRow { value, metric: metric.clone(), mean, std: var.sqrt(), n });
        }
    }
    let report = SweepReport { param: spec.param, entries, rows };
    if let Some(root) = out {
        let path = root.join("sweep_summary.csv");
        let f = fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        report.write_summary_csv(f)?;
    }
    Ok(report)
}
