// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration, runs, sweeps and run comparison.
//!
//! A run directory holds `epochs.csv`, `values.csv` (`state,action,value`),
//! `policy.csv` (`state,greedy_action`), windowed metric series
//! (`window_index,value`) and `manifest.json` listing all of them.

mod compare;
mod config;
mod run;
mod sweep;

use std::path::Path;

use thiserror::Error;

pub use compare::{compare, write_comparison, Comparison, MetricDelta};
pub use config::{Backend, ExperimentConfig, Task};
pub use run::{execute, prepare_dir, run, write_output, PhaseRange, PhaseResult, RunManifest, RunOutput};
pub use sweep::{sweep, SweepEntry, SweepParam, SweepReport, SweepRow, SweepSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot compare runs: {0}")]
    Mismatch(String),
    #[error("output directory {0} is not empty (use --force to overwrite)")]
    Exists(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("run failed: {0}")]
    Run(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Io(format!("{}: {e}", path.display()))
    }

    /// Process exit code: 2 for configuration problems, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Mismatch(_) => 2,
            HarnessError::Exists(_) | HarnessError::Io(_) => 3,
            HarnessError::Run(_) => 1,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<crate::env::EnvError> for HarnessError {
    fn from(e: crate::env::EnvError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<crate::learner::EpisodeError> for HarnessError {
    fn from(e: crate::learner::EpisodeError) -> Self {
        HarnessError::Run(e.to_string())
    }
}

impl From<crate::metrics::MetricError> for HarnessError {
    fn from(e: crate::metrics::MetricError) -> Self {
        use crate::metrics::MetricError as M;
        match e {
            M::Io(e) => HarnessError::Io(e.to_string()),
            M::Csv(e) => HarnessError::Io(e.to_string()),
            other => HarnessError::Run(other.to_string()),
        }
    }
}

impl From<crate::table::TableError> for HarnessError {
    fn from(e: crate::table::TableError) -> Self {
        use crate::table::TableError as T;
        match e {
            T::Shape(s) => HarnessError::Mismatch(s),
            other => HarnessError::Io(other.to_string()),
        }
    }
}
