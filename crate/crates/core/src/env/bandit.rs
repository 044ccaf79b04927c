// SPDX-License-Identifier: Apache-2.0

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_action, EnvError, Environment, Outcome, StepResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditSpec {
    pub arm_probs: Vec<f64>,
}

impl Default for BanditSpec {
    fn default() -> Self {
        Self { arm_probs: vec![0.2, 0.4, 0.6, 0.8] }
    }
}

impl BanditSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.arm_probs.is_empty() {
            return Err(EnvError::Spec("bandit needs at least one arm".into()));
        }
        if let Some(p) = self.arm_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(EnvError::Spec(format!("arm probability {p} outside [0, 1]")));
        }
        Ok(())
    }

    /// Arm with the highest reward probability (lowest index on ties).
    pub fn optimal_arm(&self) -> usize {
        let mut best = 0;
        for (a, &p) in self.arm_probs.iter().enumerate() {
            if p > self.arm_probs[best] {
                best = a;
            }
        }
        best
    }
}

/// Stateless Bernoulli bandit; every episode is a single pull.
#[derive(Debug, Clone)]
pub struct Bandit {
    spec: BanditSpec,
    rng: ChaCha8Rng,
    done: bool,
}

impl Bandit {
    pub fn new(spec: BanditSpec, rng: ChaCha8Rng) -> Result<Self, EnvError> {
        spec.validate()?;
        Ok(Self { spec, rng, done: true })
    }

    pub fn spec(&self) -> &BanditSpec {
        &self.spec
    }
}

impl Environment for Bandit {
    fn n_states(&self) -> usize {
        1
    }

    fn n_actions(&self) -> usize {
        self.spec.arm_probs.len()
    }

    fn reset(&mut self) -> usize {
        self.done = false;
        0
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        check_action(action, self.n_actions())?;
        if self.done {
            return Err(EnvError::StepAfterTerminal);
        }
        self.done = true;
        let p = self.spec.arm_probs[action];
        let outcome = if self.rng.gen_bool(p) { Outcome::Reward } else { Outcome::Punish };
        Ok(StepResult::finished(0, outcome))
    }
}
