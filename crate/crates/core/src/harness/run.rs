// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::baseline::maze_policy_failures;
use crate::env::{Bandit, Blackjack, Environment, Maze, MazeSpec};
use crate::learner::{run_epochs, run_episode, Learner, McAgent};
use crate::metrics::{self, EpochLog};
use crate::seed::{stream_rng, Stream};
use crate::table::{write_policy_csv, ValueTable};

use super::{Backend, ExperimentConfig, HarnessError, Task};

/// Learner state at the end of one arena configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseResult {
    pub name: String,
    /// Epoch range `[start_epoch, end_epoch)`.
    pub start_epoch: u64,
    pub end_epoch: u64,
    pub values: ValueTable,
    pub policy: Vec<usize>,
    pub maze: Option<MazeSpec>,
}

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Resolved configuration.
    pub config: ExperimentConfig,
    pub log: EpochLog,
    pub phases: Vec<PhaseResult>,
    pub summary: BTreeMap<String, f64>,
}

impl RunOutput {
    pub fn final_phase(&self) -> &PhaseResult {
        self.phases.last().expect("runs have at least one phase")
    }

    pub fn phase_records(&self, k: usize) -> &[metrics::EpochRecord] {
        let p = &self.phases[k];
        &self.log.records()[p.start_epoch as usize..p.end_epoch as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRange {
    pub name: String,
    pub start_epoch: u64,
    pub end_epoch: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub phases: Vec<PhaseRange>,
    pub files: Vec<String>,
    pub summary: BTreeMap<String, f64>,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn read(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(Self::FILE);
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
    }
}

fn learner(cfg: &ExperimentConfig, n_states: usize, n_actions: usize) -> Result<Box<dyn Learner + Send>, HarnessError> {
    Ok(match cfg.backend {
        Backend::Spiking => Box::new(Agent::new(cfg.agent_config(n_states, n_actions)).map_err(|e| HarnessError::Config(e.to_string()))?),
        Backend::Cpu => Box::new(McAgent::new(n_states, n_actions, cfg.policy(), cfg.seed)),
    })
}

fn snapshot(name: String, start: u64, log: &EpochLog, learner: &dyn Learner, maze: Option<MazeSpec>) -> PhaseResult {
    let values = learner.values();
    let policy = values.greedy_policy();
    PhaseResult { name, start_epoch: start, end_epoch: log.len() as u64, values, policy, maze }
}

/// Runs the experiment in memory.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let cfg = config.resolved();
    let epochs = cfg.epochs.expect("resolved");
    let tail = cfg.final_epochs.expect("resolved") as usize;
    let first = cfg.first_action();
    let env_rng = stream_rng(cfg.seed, Stream::Environment);
    let mut log = EpochLog::default();
    let mut phases = Vec::new();
    let mut summary = BTreeMap::new();

    match cfg.task {
        Task::Bandit => {
            let spec = cfg.bandit.clone().expect("resolved");
            let mut env = Bandit::new(spec.clone(), env_rng)?;
            let mut l = learner(&cfg, 1, spec.arm_probs.len())?;
            run_epochs(&mut env, l.as_mut(), first, epochs, &mut log)?;
            phases.push(snapshot("bandit".into(), 0, &log, l.as_ref(), None));
            let optimal = spec.optimal_arm();
            summary.insert("optimal_arm".into(), optimal as f64);
            summary.insert("moa_final".into(), metrics::moa_overall(log.tail(tail), optimal)?);
        }
        Task::Maze => {
            let specs = cfg.maze_phases.clone().expect("resolved");
            let mut env = Maze::new(specs[0].clone(), env_rng)?;
            let mut l = learner(&cfg, env.n_states(), env.n_actions())?;
            for (k, spec) in specs.iter().enumerate() {
                if k > 0 {
                    env.reconfigure(spec.walls.clone(), spec.goal)?;
                }
                let start = log.len() as u64;
                run_epochs(&mut env, l.as_mut(), first, epochs, &mut log)?;
                let phase = snapshot(format!("phase{}", k + 1), start, &log, l.as_ref(), Some(spec.clone()));
                let records = &log.records()[start as usize..];
                let final_return = metrics::mean_return(&records[records.len().saturating_sub(tail)..]);
                if let Some(r) = final_return {
                    summary.insert(format!("return_final_phase{}", k + 1), r);
                }
                summary.insert(format!("policy_failures_phase{}", k + 1), maze_policy_failures(spec, &phase.policy).len() as f64);
                phases.push(phase);
            }
        }
        Task::Blackjack => {
            let mut env = Blackjack::new(env_rng);
            let mut l = learner(&cfg, env.n_states(), env.n_actions())?;
            for episode in 0..epochs {
                run_episode(&mut env, l.as_mut(), first, episode, &mut log)?;
            }
            phases.push(snapshot("blackjack".into(), 0, &log, l.as_ref(), None));
            if let Some(f) = metrics::current_state_ltm_fraction(log.records()) {
                summary.insert("ltm_current_fraction".into(), f);
            }
        }
    }

    summary.insert("epochs".into(), log.len() as f64);
    summary.insert("episodes".into(), log.last().map_or(0, |r| r.episode + 1) as f64);
    if let Some(r) = metrics::mean_return(log.records()) {
        summary.insert("mean_return".into(), r);
    }
    if let Some(r) = metrics::mean_return(log.tail(tail)) {
        summary.insert("mean_return_final".into(), r);
    }
    summary.insert("spikes_per_epoch".into(), metrics::spikes_per_epoch(log.records()));
    Ok(RunOutput { config: cfg, log, phases, summary })
}

/// Prepares `dir` for a run: creates it, or refuses if it already holds
/// files and `force` is off.
pub fn prepare_dir(dir: &Path, force: bool) -> Result<(), HarnessError> {
    if dir.exists() {
        let occupied = fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?.next().is_some();
        if occupied && !force {
            return Err(HarnessError::Exists(dir.display().to_string()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn file(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<(), HarnessError>) -> Result<(), HarnessError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut w = BufWriter::new(f);
        body(&mut w)?;
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn values(&mut self, name: &str, t: &ValueTable) -> Result<(), HarnessError> {
        self.file(name, |w| Ok(t.write_csv(w)?))
    }

    fn policy(&mut self, name: &str, p: &[usize]) -> Result<(), HarnessError> {
        self.file(name, |w| Ok(write_policy_csv(p, w)?))
    }

    fn series(&mut self, name: &str, s: &[Option<f64>]) -> Result<(), HarnessError> {
        self.file(name, |w| Ok(metrics::write_series_csv(s, w)?))
    }
}

/// Writes a run's artifacts and manifest into `dir`.
pub fn write_output(out: &RunOutput, dir: &Path, force: bool) -> Result<RunManifest, HarnessError> {
    prepare_dir(dir, force)?;
    let mut w = Writer { dir, files: Vec::new() };
    let window = out.config.metric_window;
    w.file("epochs.csv", |f| Ok(out.log.write_csv(f)?))?;
    let last = out.final_phase();
    w.values("values.csv", &last.values)?;
    w.policy("policy.csv", &last.policy)?;
    match out.config.task {
        Task::Bandit => {
            let optimal = out.summary["optimal_arm"] as usize;
            let moa: Vec<Option<f64>> = metrics::moa(out.log.records(), optimal, window)?.into_iter().map(Some).collect();
            w.series("moa.csv", &moa)?;
            w.series("returns.csv", &metrics::average_return(out.log.records(), window)?)?;
        }
        Task::Maze => {
            for (k, p) in out.phases.iter().enumerate() {
                let n = k + 1;
                w.series(&format!("returns_phase{n}.csv"), &metrics::average_return(out.phase_records(k), window)?)?;
                w.values(&format!("values_phase{n}.csv"), &p.values)?;
                w.policy(&format!("policy_phase{n}.csv"), &p.policy)?;
                let spec = p.maze.as_ref().expect("maze phases carry their layout");
                w.file(&format!("layout_phase{n}.json"), |f| {
                    serde_json::to_writer_pretty(&mut *f, spec).map_err(|e| HarnessError::Io(e.to_string()))?;
                    Ok(writeln!(f)?)
                })?;
            }
        }
        Task::Blackjack => {
            w.series("returns.csv", &metrics::average_return(out.log.records(), window)?)?;
        }
    }

    let mut files = w.files;
    files.push(RunManifest::FILE.to_string());
    let manifest = RunManifest {
        config: out.config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        phases: out
            .phases
            .iter()
            .map(|p| PhaseRange { name: p.name.clone(), start_epoch: p.start_epoch, end_epoch: p.end_epoch })
            .collect(),
        files,
        summary: out.summary.clone(),
    };
    let path = dir.join(RunManifest::FILE);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(manifest)
}

/// [`execute`] then [`write_output`].
pub fn run(config: &ExperimentConfig, dir: &Path, force: bool) -> Result<RunManifest, HarnessError> {
    config.validate()?;
    prepare_dir(dir, force)?;
    let out = execute(config)?;
    write_output(&out, dir, true)
}
