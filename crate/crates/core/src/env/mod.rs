// SPDX-License-Identifier: Apache-2.0

//! Episodic tasks behind one interface: multi-arm bandit, gridworld maze and
//! infinite-deck Blackjack.

mod bandit;
mod blackjack;
mod maze;

pub use bandit::{Bandit, BanditSpec};
pub use blackjack::{dealer_plays, settle, Blackjack, BlackjackState, Hand, HIT, N_STATES as BLACKJACK_STATES, STICK};
pub use maze::{Direction, Maze, MazeSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Reward,
    Punish,
    #[serde(rename = "none")]
    Neutral,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Reward => "reward",
            Outcome::Punish => "punish",
            Outcome::Neutral => "none",
        }
    }

    /// `reward -> 1`, `punish -> 0`, `none -> None`.
    pub fn score(self) -> Option<f64> {
        match self {
            Outcome::Reward => Some(1.0),
            Outcome::Punish => Some(0.0),
            Outcome::Neutral => None,
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reward" => Ok(Outcome::Reward),
            "punish" => Ok(Outcome::Punish),
            "none" => Ok(Outcome::Neutral),
            other => Err(format!("unknown outcome {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepResult {
    pub next_state: usize,
    pub terminal: bool,
    /// Always `Neutral` unless `terminal`.
    pub outcome: Outcome,
}

impl StepResult {
    pub fn running(next_state: usize) -> Self {
        Self { next_state, terminal: false, outcome: Outcome::Neutral }
    }

    pub fn finished(next_state: usize, outcome: Outcome) -> Self {
        Self { next_state, terminal: true, outcome }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("action {action} out of range (environment has {n_actions})")]
    Action { action: usize, n_actions: usize },
    #[error("step called after the episode ended; call reset first")]
    StepAfterTerminal,
    #[error("invalid environment spec: {0}")]
    Spec(String),
}

pub trait Environment {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Starts a new episode and returns its initial state.
    fn reset(&mut self) -> usize;
    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;
}

fn check_action(action: usize, n_actions: usize) -> Result<(), EnvError> {
    if action >= n_actions {
        Err(EnvError::Action { action, n_actions })
    } else {
        Ok(())
    }
}
