// SPDX-License-Identifier: Apache-2.0

//! The spiking dual-memory learner.
//!
//! Four modules are compiled into one netlist:
//!
//! * **decoder**: one latch per state, reset and then set on every observation;
//! * **STM**: one latch per state-action pair, set through an outer-product
//!   gate of the decoder and the action line, cleared at episode end;
//! * **LTM**: one value circuit per pair. At episode end each pair's replay
//!   line is pulsed at a random phase; the pulse only reaches the value
//!   circuit through a gate opened by that pair's STM latch;
//! * **encoder**: gates passing LTM output only for the decoded state. The
//!   host counts encoder spikes over a `T`-step window and takes the argmax.
//!
//! A pair visited twice in one episode holds one latch and so receives one
//! reinforcement signal: first-visit Monte Carlo.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{add_value_circuits, reinforcement_window, CircuitError, ValueCircuitConfig, ValueCircuitHandle, ValueCircuitNodes};
use crate::env::Outcome;
use crate::graph::{CircuitGraph, GraphError, Netlist, NodeId, NodeKind, Part, Pattern, GATE_WEIGHT};
use crate::kernel::{KernelError, Network};
use crate::learner::Learner;
use crate::seed::{stream_rng, Stream};
use crate::table::ValueTable;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("state {state} out of range (agent has {n_states})")]
    State { state: usize, n_states: usize },
    #[error("action {action} out of range (agent has {n_actions})")]
    Action { action: usize, n_actions: usize },
    #[error("no state observed yet")]
    NoState,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Policy {
    Greedy,
    EpsilonGreedy { epsilon: f64 },
}

impl Policy {
    pub fn epsilon(&self) -> f64 {
        match *self {
            Policy::Greedy => 0.0,
            Policy::EpsilonGreedy { epsilon } => epsilon,
        }
    }

    pub fn from_epsilon(epsilon: f64) -> Self {
        if epsilon > 0.0 {
            Policy::EpsilonGreedy { epsilon }
        } else {
            Policy::Greedy
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub vc: ValueCircuitConfig,
    /// Rate-coding window `T` used for action selection.
    pub window: usize,
    pub policy: Policy,
    pub seed: u64,
}

impl AgentConfig {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, vc: ValueCircuitConfig::default(), window: 64, policy: Policy::Greedy, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(AgentError::Config("n_states and n_actions must be >= 1".into()));
        }
        if self.window == 0 {
            return Err(AgentError::Config("window must be >= 1".into()));
        }
        let eps = self.policy.epsilon();
        if !(0.0..=1.0).contains(&eps) {
            return Err(AgentError::Config(format!("epsilon {eps} outside [0, 1]")));
        }
        self.vc.validate()?;
        Ok(())
    }
}

/// Graph nodes of the assembled learner.
#[derive(Debug, Clone, Copy)]
pub struct AgentNodes {
    pub state_set: NodeId,
    pub state_reset: NodeId,
    pub action: NodeId,
    pub stm_reset: NodeId,
    pub reward_replay: NodeId,
    pub punish_replay: NodeId,
    pub decoder: NodeId,
    pub stm: NodeId,
    pub stm_pair: NodeId,
    pub ltm: ValueCircuitNodes,
    pub reward_route: NodeId,
    pub punish_route: NodeId,
    pub encoder: NodeId,
}

/// Builds the learner's circuit graph for an `n_states x n_actions` task.
pub fn agent_graph(n_states: usize, n_actions: usize, vc: &ValueCircuitConfig) -> Result<(CircuitGraph, AgentNodes), AgentError> {
    let pairs = [n_states, n_actions];
    let mut g = CircuitGraph::new();
    let state_set = g.add_node(NodeKind::Port, &[n_states], "state_set")?;
    let state_reset = g.add_node(NodeKind::Port, &[1], "state_reset")?;
    let action = g.add_node(NodeKind::Port, &[n_actions], "action")?;
    let stm_reset = g.add_node(NodeKind::Port, &[1], "stm_reset")?;
    let reward_replay = g.add_node(NodeKind::Port, &pairs, "reward_replay")?;
    let punish_replay = g.add_node(NodeKind::Port, &pairs, "punish_replay")?;

    let decoder = g.add_node(NodeKind::LatchBank, &[n_states], "decoder")?;
    g.connect(state_set, decoder, Pattern::OneToOne, 1)?;
    g.connect(state_reset, decoder, Pattern::AllToAll, -1)?;

    let stm = g.add_node(NodeKind::LatchBank, &pairs, "stm")?;
    let stm_pair = g.connect(decoder, stm, Pattern::OuterProduct { with: action }, 1)?.expect("outer product adds gates");
    g.connect(stm_reset, stm, Pattern::AllToAll, -1)?;

    let ltm = add_value_circuits(&mut g, &pairs, vc, "ltm")?;
    let reward_route = g.gate(stm, reward_replay, "route.reward")?;
    let punish_route = g.gate(stm, punish_replay, "route.punish")?;
    g.connect(reward_route, ltm.reward_gate, Pattern::OneToOne, GATE_WEIGHT)?;
    g.connect(punish_route, ltm.punish_gate, Pattern::OneToOne, GATE_WEIGHT)?;

    let encoder = g.gate(ltm.srif, decoder, "encoder")?;

    Ok((
        g,
        AgentNodes {
            state_set,
            state_reset,
            action,
            stm_reset,
            reward_replay,
            punish_replay,
            decoder,
            stm,
            stm_pair,
            ltm,
            reward_route,
            punish_route,
            encoder,
        },
    ))
}

/// Spike totals from the most recent action-selection window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WindowStats {
    /// Every spike in the network.
    pub spikes: u64,
    /// Spikes of all value-circuit compartments.
    pub ltm_spikes: u64,
    /// Spikes of the value circuits belonging to the decoded state.
    pub ltm_current_spikes: u64,
}

#[derive(Debug, Clone)]
pub struct Agent {
    cfg: AgentConfig,
    netlist: Netlist,
    nodes: AgentNodes,
    net: Network,
    decoder: Vec<usize>,
    stm: Vec<usize>,
    ltm: Vec<ValueCircuitHandle>,
    encoder: Vec<usize>,
    reward_route: Vec<usize>,
    punish_route: Vec<usize>,
    state_set: usize,
    state_reset: usize,
    action_base: usize,
    stm_reset: usize,
    reward_replay: usize,
    punish_replay: usize,
    rng: ChaCha8Rng,
    current: Option<usize>,
    last_window: WindowStats,
    replay: Vec<Vec<usize>>,
}

impl Agent {
    pub fn new(cfg: AgentConfig) -> Result<Self, AgentError> {
        cfg.validate()?;
        let (graph, nodes) = agent_graph(cfg.n_states, cfg.n_actions, &cfg.vc)?;
        let netlist = graph.compile()?;
        let mut net = netlist.instantiate()?;

        let (s_n, a_n) = (cfg.n_states, cfg.n_actions);
        let main = |node: NodeId, coord: &[usize]| netlist.index(node, coord, Part::Main).expect("compiled node");
        let pair_coords = || (0..s_n).flat_map(move |s| (0..a_n).map(move |a| [s, a]));

        let decoder = (0..s_n).map(|s| main(nodes.decoder, &[s])).collect();
        let stm = pair_coords().map(|c| main(nodes.stm, &c)).collect();
        let encoder = pair_coords().map(|c| main(nodes.encoder, &c)).collect();
        let reward_route = pair_coords().map(|c| main(nodes.reward_route, &c)).collect();
        let punish_route = pair_coords().map(|c| main(nodes.punish_route, &c)).collect();
        let ltm: Vec<ValueCircuitHandle> = pair_coords()
            .map(|c| ValueCircuitHandle::resolve(&netlist, &nodes.ltm, &c).expect("compiled value circuit"))
            .collect();
        for h in &ltm {
            net.set_memory_charge(h.memory, cfg.vc.initial_charge())?;
        }

        let replay = vec![Vec::new(); cfg.vc.theta as usize];
        Ok(Self {
            state_set: main(nodes.state_set, &[0]),
            state_reset: main(nodes.state_reset, &[0]),
            action_base: main(nodes.action, &[0]),
            stm_reset: main(nodes.stm_reset, &[0]),
            reward_replay: main(nodes.reward_replay, &[0, 0]),
            punish_replay: main(nodes.punish_replay, &[0, 0]),
            rng: stream_rng(cfg.seed, Stream::Agent),
            netlist,
            nodes,
            net,
            decoder,
            stm,
            ltm,
            encoder,
            reward_route,
            punish_route,
            current: None,
            last_window: WindowStats::default(),
            replay,
            cfg,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    pub fn nodes(&self) -> &AgentNodes {
        &self.nodes
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn current_state(&self) -> Option<usize> {
        self.current
    }

    pub fn value_circuit(&self, state: usize, action: usize) -> &ValueCircuitHandle {
        &self.ltm[state * self.cfg.n_actions + action]
    }

    pub fn last_window(&self) -> WindowStats {
        self.last_window
    }

    fn check_state(&self, state: usize) -> Result<(), AgentError> {
        if state >= self.cfg.n_states {
            return Err(AgentError::State { state, n_states: self.cfg.n_states });
        }
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<(), AgentError> {
        if action >= self.cfg.n_actions {
            return Err(AgentError::Action { action, n_actions: self.cfg.n_actions });
        }
        Ok(())
    }

    fn pulse(&mut self, line: usize) {
        self.net.step_with(&[line], &[]).expect("agent input lines are in range");
    }

    /// Loads `state` into the decoder: one reset step, one set step, and one
    /// step for the latch to come up.
    pub fn observe(&mut self, state: usize) -> Result<(), AgentError> {
        self.check_state(state)?;
        self.pulse(self.state_reset);
        self.pulse(self.state_set + state);
        self.net.idle(1);
        self.current = Some(state);
        Ok(())
    }

    /// Encoder spike counts per action over one `T`-step window.
    pub fn read_window(&mut self) -> Result<Vec<u64>, AgentError> {
        let state = self.current.ok_or(AgentError::NoState)?;
        let a_n = self.cfg.n_actions;
        let encoder_totals = |net: &Network, enc: &[usize]| -> Vec<u64> {
            let counts = net.spike_counts();
            let mut per_action = vec![0u64; a_n];
            for (k, &i) in enc.iter().enumerate() {
                per_action[k % a_n] += counts[i];
            }
            per_action
        };
        let ltm_totals = |net: &Network, ltm: &[ValueCircuitHandle]| -> (u64, u64) {
            let counts = net.spike_counts();
            let mut all = 0;
            let mut current = 0;
            for (k, h) in ltm.iter().enumerate() {
                let c: u64 = h.compartments().iter().map(|&i| counts[i]).sum();
                all += c;
                if k / a_n == state {
                    current += c;
                }
            }
            (all, current)
        };

        let before = encoder_totals(&self.net, &self.encoder);
        let (ltm_before, cur_before) = ltm_totals(&self.net, &self.ltm);
        let spikes_before = self.net.total_spikes();
        self.net.idle(self.cfg.window);
        let after = encoder_totals(&self.net, &self.encoder);
        let (ltm_after, cur_after) = ltm_totals(&self.net, &self.ltm);
        self.last_window = WindowStats {
            spikes: self.net.total_spikes() - spikes_before,
            ltm_spikes: ltm_after - ltm_before,
            ltm_current_spikes: cur_after - cur_before,
        };
        Ok(after.iter().zip(&before).map(|(a, b)| a - b).collect())
    }

    /// Runs a decision window and applies the policy: argmax of encoder
    /// counts with uniform tie-breaking, or with probability ε a uniform
    /// random action.
    pub fn choose_action(&mut self) -> Result<usize, AgentError> {
        let counts = self.read_window()?;
        let eps = self.cfg.policy.epsilon();
        if eps > 0.0 && self.rng.gen_bool(eps) {
            return Ok(self.rng.gen_range(0..self.cfg.n_actions));
        }
        Ok(argmax_random(&counts, &mut self.rng))
    }

    /// Runs a decision window but returns a uniform random action (exploring
    /// starts).
    pub fn choose_random_action(&mut self) -> Result<usize, AgentError> {
        self.read_window()?;
        Ok(self.rng.gen_range(0..self.cfg.n_actions))
    }

    /// Sets the STM latch for `(state, action)`, observing `state` first if
    /// the decoder holds a different one.
    pub fn record(&mut self, state: usize, action: usize) -> Result<(), AgentError> {
        self.check_state(state)?;
        self.check_action(action)?;
        if self.current != Some(state) {
            self.observe(state)?;
        }
        self.pulse(self.action_base + action);
        self.net.idle(2);
        Ok(())
    }

    /// Replays the STM into the LTM (one phase-randomized signal per pair
    /// for a reward or punishment) and clears the STM.
    pub fn finish_episode(&mut self, outcome: Outcome) -> Result<(), AgentError> {
        let base = match outcome {
            Outcome::Reward => Some(self.reward_replay),
            Outcome::Punish => Some(self.punish_replay),
            Outcome::Neutral => None,
        };
        if let Some(base) = base {
            let theta = self.cfg.vc.theta as usize;
            for bucket in &mut self.replay {
                bucket.clear();
            }
            for pair in 0..self.stm.len() {
                let phase = self.rng.gen_range(0..theta);
                self.replay[phase].push(base + pair);
            }
            for t in 0..reinforcement_window(self.cfg.vc.theta) {
                let lines = self.replay.get(t).map(Vec::as_slice).unwrap_or(&[]);
                self.net.step_with(lines, &[]).expect("replay lines are in range");
            }
        }
        self.pulse(self.stm_reset);
        self.net.idle(1);
        Ok(())
    }

    /// Exact `q / θ` of every value circuit.
    pub fn snapshot_values(&self) -> ValueTable {
        let values = self.ltm.iter().map(|h| h.rate(&self.net)).collect();
        ValueTable::from_values(self.cfg.n_states, self.cfg.n_actions, values).expect("shape")
    }

    pub fn charge(&self, state: usize, action: usize) -> u32 {
        self.value_circuit(state, action).charge(&self.net)
    }

    /// Overwrites one value circuit's charge.
    pub fn set_charge(&mut self, state: usize, action: usize, charge: u32) -> Result<(), AgentError> {
        self.check_state(state)?;
        self.check_action(action)?;
        let memory = self.value_circuit(state, action).memory;
        self.net.set_memory_charge(memory, charge)?;
        Ok(())
    }

    /// States whose decoder latch is on.
    pub fn active_states(&self) -> Vec<usize> {
        (0..self.cfg.n_states).filter(|&s| self.net.is_latched(self.decoder[s])).collect()
    }

    /// Pairs whose STM latch is on.
    pub fn active_pairs(&self) -> Vec<(usize, usize)> {
        let a_n = self.cfg.n_actions;
        (0..self.stm.len()).filter(|&k| self.net.is_latched(self.stm[k])).map(|k| (k / a_n, k % a_n)).collect()
    }

    /// Lifetime spikes of the replay routing gates; each spike is one
    /// reinforcement signal delivered to a value circuit.
    pub fn routed_signals(&self) -> u64 {
        let counts = self.net.spike_counts();
        self.reward_route.iter().chain(&self.punish_route).map(|&i| counts[i]).sum()
    }
}

/// Index of a maximal entry, uniformly among ties.
pub fn argmax_random<T: PartialOrd + Copy, R: Rng + ?Sized>(values: &[T], rng: &mut R) -> usize {
    let mut best = values[0];
    let mut n_best = 0usize;
    let mut pick = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            n_best = 1;
            pick = i;
        } else if v == best {
            n_best += 1;
            // reservoir sampling over the tied entries
            if n_best == 1 || rng.gen_range(0..n_best) == 0 {
                pick = i;
            }
        }
    }
    pick
}

impl Learner for Agent {
    fn n_states(&self) -> usize {
        self.cfg.n_states
    }

    fn n_actions(&self) -> usize {
        self.cfg.n_actions
    }

    fn act(&mut self, state: usize, explore: bool) -> Result<usize, AgentError> {
        self.observe(state)?;
        if explore {
            self.choose_random_action()
        } else {
            self.choose_action()
        }
    }

    fn record(&mut self, state: usize, action: usize) -> Result<(), AgentError> {
        Agent::record(self, state, action)
    }

    fn finish(&mut self, outcome: Outcome) -> Result<(), AgentError> {
        self.finish_episode(outcome)
    }

    fn values(&self) -> ValueTable {
        self.snapshot_values()
    }

    fn window_stats(&self) -> WindowStats {
        self.last_window
    }

    fn total_spikes(&self) -> u64 {
        self.net.total_spikes()
    }
}
