// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, Policy};
use crate::circuits::ValueCircuitConfig;
use crate::env::{BanditSpec, MazeSpec};
use crate::learner::FirstAction;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Bandit,
    Maze,
    Blackjack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Spiking,
    Cpu,
}

macro_rules! str_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = HarnessError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(HarnessError::Config(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"), other
                    ))),
                }
            }
        }
    };
}

str_enum!(Task { Bandit => "bandit", Maze => "maze", Blackjack => "blackjack" });
str_enum!(Backend { Spiking => "spiking", Cpu => "cpu" });

/// One experiment. Unset fields take task defaults (see [`ExperimentConfig::resolved`]).
///
/// JSON keys: `task`, `backend`, `epochs`, `epsilon`, `T`, `theta`,
/// `delta_q`, `seed`, `bandit`, `maze_phases`, `random_first_action`,
/// `metric_window`, `final_epochs`, `out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    /// Epochs for the bandit, epochs per phase for the maze, episodes for
    /// Blackjack.
    #[serde(default)]
    pub epochs: Option<u64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Rate-coding window.
    #[serde(rename = "T", default = "default_window")]
    pub window: usize,
    /// Value-circuit threshold; defaults to `T`, so the rate-coding period
    /// sets both the readout window and the number of value levels.
    #[serde(default)]
    pub theta: Option<u32>,
    #[serde(default = "default_delta_q")]
    pub delta_q: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandit: Option<BanditSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maze_phases: Option<Vec<MazeSpec>>,
    /// Uniform random first action in every episode (exploring starts).
    #[serde(default)]
    pub random_first_action: Option<bool>,
    /// Window of the MOA and average-return series.
    #[serde(default = "default_metric_window")]
    pub metric_window: usize,
    /// Trailing epochs (per phase for the maze) summarized in the manifest.
    #[serde(default)]
    pub final_epochs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn default_backend() -> Backend {
    Backend::Spiking
}

fn default_window() -> usize {
    64
}

fn default_delta_q() -> u32 {
    1
}

fn default_metric_window() -> usize {
    100
}

impl ExperimentConfig {
    pub fn new(task: Task, backend: Backend) -> Self {
        Self {
            task,
            backend,
            epochs: None,
            epsilon: None,
            window: default_window(),
            theta: None,
            delta_q: default_delta_q(),
            seed: 0,
            bandit: None,
            maze_phases: None,
            random_first_action: None,
            metric_window: default_metric_window(),
            final_epochs: None,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A copy with every task default filled in.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        let (epochs, epsilon, first, tail) = match self.task {
            Task::Bandit => (2000, 0.1, false, 1000),
            Task::Maze => (4000, 0.0, false, 500),
            Task::Blackjack => (200_000, 0.0, true, 10_000),
        };
        c.epochs.get_or_insert(epochs);
        c.epsilon.get_or_insert(epsilon);
        c.random_first_action.get_or_insert(first);
        c.final_epochs.get_or_insert(tail);
        c.theta.get_or_insert(self.default_theta());
        match self.task {
            Task::Bandit => {
                c.bandit.get_or_insert_with(BanditSpec::default);
            }
            Task::Maze => {
                c.maze_phases.get_or_insert_with(MazeSpec::phases);
            }
            Task::Blackjack => {}
        }
        c
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let c = self.resolved();
        if c.epochs == Some(0) {
            return bad("epochs must be >= 1".into());
        }
        let eps = c.epsilon.unwrap_or_default();
        if !(0.0..=1.0).contains(&eps) {
            return bad(format!("epsilon {eps} outside [0, 1]"));
        }
        if self.window == 0 {
            return bad("T must be >= 1".into());
        }
        if self.metric_window == 0 {
            return bad("metric_window must be >= 1".into());
        }
        self.vc().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.bandit.is_some() && self.task != Task::Bandit {
            return bad("`bandit` is only valid for the bandit task".into());
        }
        if self.maze_phases.is_some() && self.task != Task::Maze {
            return bad("`maze_phases` is only valid for the maze task".into());
        }
        if let Some(b) = &c.bandit {
            b.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if let Some(phases) = &c.maze_phases {
            let Some(first) = phases.first() else {
                return bad("maze_phases must not be empty".into());
            };
            for p in phases {
                p.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
                if (p.width, p.height) != (first.width, first.height) {
                    return bad("all maze phases must share one grid size".into());
                }
            }
        }
        Ok(())
    }

    fn default_theta(&self) -> u32 {
        u32::try_from(self.window).unwrap_or(u32::MAX)
    }

    pub fn vc(&self) -> ValueCircuitConfig {
        ValueCircuitConfig { theta: self.theta.unwrap_or(self.default_theta()), delta_q: self.delta_q, initial: None }
    }

    pub fn policy(&self) -> Policy {
        Policy::from_epsilon(self.resolved().epsilon.unwrap_or_default())
    }

    pub fn first_action(&self) -> FirstAction {
        if self.resolved().random_first_action == Some(true) {
            FirstAction::Random
        } else {
            FirstAction::Policy
        }
    }

    pub fn agent_config(&self, n_states: usize, n_actions: usize) -> AgentConfig {
        AgentConfig { n_states, n_actions, vc: self.vc(), window: self.window, policy: self.policy(), seed: self.seed }
    }
}
