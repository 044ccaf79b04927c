// SPDX-License-Identifier: Apache-2.0

//! The episodic loop shared by the spiking agent and the CPU baseline.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{argmax_random, AgentError, Policy, WindowStats};
use crate::env::{EnvError, Environment, Outcome};
use crate::metrics::{EpochLog, EpochRecord};
use crate::seed::{stream_rng, Stream};
use crate::table::ValueTable;

/// A tabular episodic learner: choose, remember the trajectory, learn at the end.
pub trait Learner {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Observes `state` and picks an action; `explore` forces a uniform
    /// random action.
    fn act(&mut self, state: usize, explore: bool) -> Result<usize, AgentError>;
    fn record(&mut self, state: usize, action: usize) -> Result<(), AgentError>;
    fn finish(&mut self, outcome: Outcome) -> Result<(), AgentError>;
    fn values(&self) -> ValueTable;
    fn window_stats(&self) -> WindowStats {
        WindowStats::default()
    }
    /// Lifetime spike total; zero for non-spiking learners.
    fn total_spikes(&self) -> u64 {
        0
    }
}

/// First-visit Monte Carlo with running-average updates in `f64`.
#[derive(Debug, Clone)]
pub struct McAgent {
    table: ValueTable,
    policy: Policy,
    rng: ChaCha8Rng,
    visited: Vec<bool>,
    trajectory: Vec<usize>,
}

impl McAgent {
    pub const INITIAL_VALUE: f64 = 0.5;

    pub fn new(n_states: usize, n_actions: usize, policy: Policy, seed: u64) -> Self {
        Self {
            table: ValueTable::filled(n_states, n_actions, Self::INITIAL_VALUE),
            policy,
            rng: stream_rng(seed, Stream::Agent),
            visited: vec![false; n_states * n_actions],
            trajectory: Vec::new(),
        }
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }
}

impl Learner for McAgent {
    fn n_states(&self) -> usize {
        self.table.n_states
    }

    fn n_actions(&self) -> usize {
        self.table.n_actions
    }

    fn act(&mut self, state: usize, explore: bool) -> Result<usize, AgentError> {
        if state >= self.table.n_states {
            return Err(AgentError::State { state, n_states: self.table.n_states });
        }
        let n = self.table.n_actions;
        let eps = self.policy.epsilon();
        if explore || (eps > 0.0 && self.rng.gen_bool(eps)) {
            return Ok(self.rng.gen_range(0..n));
        }
        Ok(argmax_random(self.table.row(state), &mut self.rng))
    }

    fn record(&mut self, state: usize, action: usize) -> Result<(), AgentError> {
        if state >= self.table.n_states {
            return Err(AgentError::State { state, n_states: self.table.n_states });
        }
        if action >= self.table.n_actions {
            return Err(AgentError::Action { action, n_actions: self.table.n_actions });
        }
        let k = state * self.table.n_actions + action;
        if !self.visited[k] {
            self.visited[k] = true;
            self.trajectory.push(k);
        }
        Ok(())
    }

    fn finish(&mut self, outcome: Outcome) -> Result<(), AgentError> {
        let score = outcome.score();
        for k in self.trajectory.drain(..) {
            self.visited[k] = false;
            if let Some(g) = score {
                self.table.counts[k] += 1;
                let n = self.table.counts[k] as f64;
                self.table.values[k] += (g - self.table.values[k]) / n;
            }
        }
        Ok(())
    }

    fn values(&self) -> ValueTable {
        self.table.clone()
    }
}

/// How the first action of an episode is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstAction {
    Policy,
    /// Uniform random first action (exploring starts).
    Random,
}

#[derive(Debug, thiserror::Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Runs one episode, appending one record per epoch to `log`.
pub fn run_episode<E, L>(env: &mut E, learner: &mut L, first: FirstAction, episode: u64, log: &mut EpochLog) -> Result<Outcome, EpisodeError>
where
    E: Environment + ?Sized,
    L: Learner + ?Sized,
{
    let mut state = env.reset();
    let mut first_step = true;
    loop {
        let spikes_before = learner.total_spikes();
        let action = learner.act(state, first_step && first == FirstAction::Random)?;
        first_step = false;
        learner.record(state, action)?;
        let result = env.step(action)?;
        if result.terminal {
            learner.finish(result.outcome)?;
        }
        let window = learner.window_stats();
        log.push(EpochRecord {
            epoch: log.len() as u64,
            episode,
            state,
            action,
            outcome: result.outcome,
            spikes: window.spikes,
            ltm_spikes: window.ltm_spikes,
            ltm_current_spikes: window.ltm_current_spikes,
            epoch_spikes: learner.total_spikes() - spikes_before,
        });
        if result.terminal {
            return Ok(result.outcome);
        }
        state = result.next_state;
    }
}

/// Runs whole episodes until at least `epochs` epochs are logged.
pub fn run_epochs<E, L>(env: &mut E, learner: &mut L, first: FirstAction, epochs: u64, log: &mut EpochLog) -> Result<(), EpisodeError>
where
    E: Environment + ?Sized,
    L: Learner + ?Sized,
{
    let target = log.len() as u64 + epochs;
    let mut episode = log.last().map_or(0, |r| r.episode + 1);
    while (log.len() as u64) < target {
        run_episode(env, learner, first, episode, log)?;
        episode += 1;
    }
    Ok(())
}

/// Runs `episodes` episodes without logging (long oracle runs).
pub fn train_episodes<E, L>(env: &mut E, learner: &mut L, first: FirstAction, episodes: u64) -> Result<(), EpisodeError>
where
    E: Environment + ?Sized,
    L: Learner + ?Sized,
{
    for _ in 0..episodes {
        let mut state = env.reset();
        let mut explore = first == FirstAction::Random;
        loop {
            let action = learner.act(state, explore)?;
            explore = false;
            learner.record(state, action)?;
            let r = env.step(action)?;
            if r.terminal {
                learner.finish(r.outcome)?;
                break;
            }
            state = r.next_state;
        }
    }
    Ok(())
}
