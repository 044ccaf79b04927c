// SPDX-License-Identifier: Apache-2.0

//! Reusable spiking subcircuits: coincidence gates, inverters, latches and
//! the value circuit.
//!
//! A value circuit holds a charge `q` in `[0, θ]` that drives a soft-reset
//! integrator firing at rate `q / θ`. Reinforcement reaches the charge only
//! through two gates:
//!
//! * reward passes when the integrator was silent (via a tonic inverter) and
//!   adds `Δq`;
//! * punishment passes when the integrator fired and removes `Δq`.
//!
//! With the sampling phase uniform over a full integrator period, the charge
//! performs a birth-death walk whose drift vanishes where the firing rate
//! equals the fraction of reward among reinforcement signals.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CircuitGraph, GraphError, Netlist, NodeId, NodeKind, Part, Pattern, Wiring, GATE_WEIGHT};
use crate::kernel::{KernelError, Network};

/// Extra steps after the last possible injection so its charge change lands
/// inside the same reinforcement window.
pub const SETTLE_STEPS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("invalid value circuit config: {0}")]
    Config(String),
    #[error("and gate needs at least 2 inputs, got {0}")]
    GateInputs(usize),
    #[error("unknown reinforcement signal {0:?}")]
    UnknownSignal(String),
    #[error("phase {phase} outside the reinforcement window [0, {window})")]
    Phase { phase: usize, window: usize },
    #[error("read window must be at least 1 step")]
    EmptyWindow,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueCircuitConfig {
    pub theta: u32,
    pub delta_q: u32,
    /// Starting charge; `None` means `θ / 2`.
    #[serde(default)]
    pub initial: Option<u32>,
}

impl Default for ValueCircuitConfig {
    fn default() -> Self {
        Self { theta: 64, delta_q: 1, initial: None }
    }
}

impl ValueCircuitConfig {
    pub fn new(theta: u32, delta_q: u32) -> Self {
        Self { theta, delta_q, initial: None }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.theta == 0 {
            return Err(CircuitError::Config("theta must be >= 1".into()));
        }
        if self.delta_q == 0 || self.delta_q > self.theta {
            return Err(CircuitError::Config(format!("delta_q must lie in [1, {}], got {}", self.theta, self.delta_q)));
        }
        if let Some(q) = self.initial {
            if q > self.theta {
                return Err(CircuitError::Config(format!("initial charge {q} exceeds theta {}", self.theta)));
            }
        }
        Ok(())
    }

    pub fn initial_charge(&self) -> u32 {
        self.initial.unwrap_or(self.theta / 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reinforcement {
    Reward,
    Punish,
}

impl FromStr for Reinforcement {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reward" => Ok(Reinforcement::Reward),
            "punish" => Ok(Reinforcement::Punish),
            other => Err(CircuitError::UnknownSignal(other.to_string())),
        }
    }
}

/// Graph nodes of a bank of value circuits sharing one shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueCircuitNodes {
    pub srif: NodeId,
    pub inverter: NodeId,
    pub reward_gate: NodeId,
    pub punish_gate: NodeId,
    pub theta: u32,
    pub delta_q: u32,
}

/// Adds a bank of value circuits with the given shape. The reward and punish
/// gates still lack their second input: connect one-to-one sources into
/// `reward_gate` and `punish_gate` with weight [`GATE_WEIGHT`].
pub fn add_value_circuits(
    g: &mut CircuitGraph,
    dims: &[usize],
    cfg: &ValueCircuitConfig,
    label: &str,
) -> Result<ValueCircuitNodes, CircuitError> {
    cfg.validate()?;
    let dq = i32::try_from(cfg.delta_q).map_err(|_| CircuitError::Config("delta_q too large".into()))?;
    let srif = g.add_node(NodeKind::SrifBank { theta: cfg.theta }, dims, format!("{label}.srif"))?;
    let inverter = g.add_node(NodeKind::TonicBank, dims, format!("{label}.inv"))?;
    let reward_gate = g.add_node(NodeKind::GateBank { inputs: 2 }, dims, format!("{label}.reward"))?;
    let punish_gate = g.add_node(NodeKind::GateBank { inputs: 2 }, dims, format!("{label}.punish"))?;
    g.wire(srif, inverter, Wiring::OneToOne, -GATE_WEIGHT)?;
    g.wire(inverter, reward_gate, Wiring::OneToOne, GATE_WEIGHT)?;
    g.wire(srif, punish_gate, Wiring::OneToOne, GATE_WEIGHT)?;
    g.wire(reward_gate, srif, Wiring::OneToOne, dq)?;
    g.wire(punish_gate, srif, Wiring::OneToOne, -dq)?;
    Ok(ValueCircuitNodes { srif, inverter, reward_gate, punish_gate, theta: cfg.theta, delta_q: cfg.delta_q })
}

/// Compartment indices of one compiled value circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueCircuitHandle {
    pub memory: usize,
    pub output: usize,
    pub inverter: usize,
    pub reward_gate: usize,
    pub punish_gate: usize,
    /// Input lines driving the reward and punish gates directly, when the
    /// circuit was built standalone.
    pub reward_input: Option<usize>,
    pub punish_input: Option<usize>,
    pub theta: u32,
}

impl ValueCircuitHandle {
    pub fn resolve(netlist: &Netlist, nodes: &ValueCircuitNodes, coord: &[usize]) -> Option<Self> {
        Some(Self {
            memory: netlist.index(nodes.srif, coord, Part::Memory)?,
            output: netlist.index(nodes.srif, coord, Part::Main)?,
            inverter: netlist.index(nodes.inverter, coord, Part::Main)?,
            reward_gate: netlist.index(nodes.reward_gate, coord, Part::Main)?,
            punish_gate: netlist.index(nodes.punish_gate, coord, Part::Main)?,
            reward_input: None,
            punish_input: None,
            theta: nodes.theta,
        })
    }

    /// Every compartment belonging to the circuit.
    pub fn compartments(&self) -> [usize; 5] {
        [self.memory, self.output, self.inverter, self.reward_gate, self.punish_gate]
    }

    /// Exact held charge.
    pub fn charge(&self, net: &Network) -> u32 {
        net.memory_charge(self.memory).expect("value circuit memory compartment")
    }

    /// Exact rate `q / θ`, read without running the network.
    pub fn rate(&self, net: &Network) -> f64 {
        self.charge(net) as f64 / self.theta as f64
    }
}

/// A standalone value circuit with its own reward and punish ports.
#[derive(Debug, Clone, Copy)]
pub struct ValueCircuitFragment {
    pub nodes: ValueCircuitNodes,
    pub reward: NodeId,
    pub punish: NodeId,
}

impl ValueCircuitFragment {
    pub fn handle(&self, netlist: &Netlist) -> ValueCircuitHandle {
        let mut h = ValueCircuitHandle::resolve(netlist, &self.nodes, &[0]).expect("fragment compiled from this graph");
        h.reward_input = netlist.index(self.reward, &[0], Part::Main);
        h.punish_input = netlist.index(self.punish, &[0], Part::Main);
        h
    }
}

pub fn add_value_circuit(g: &mut CircuitGraph, cfg: &ValueCircuitConfig, label: &str) -> Result<ValueCircuitFragment, CircuitError> {
    let reward = g.add_node(NodeKind::Port, &[1], format!("{label}.reward_in"))?;
    let punish = g.add_node(NodeKind::Port, &[1], format!("{label}.punish_in"))?;
    let nodes = add_value_circuits(g, &[1], cfg, label)?;
    g.connect(reward, nodes.reward_gate, Pattern::OneToOne, GATE_WEIGHT)?;
    g.connect(punish, nodes.punish_gate, Pattern::OneToOne, GATE_WEIGHT)?;
    Ok(ValueCircuitFragment { nodes, reward, punish })
}

/// A single value circuit as its own graph.
pub fn value_circuit(cfg: &ValueCircuitConfig) -> Result<(CircuitGraph, ValueCircuitFragment), CircuitError> {
    let mut g = CircuitGraph::new();
    let frag = add_value_circuit(&mut g, cfg, "vc")?;
    Ok((g, frag))
}

/// Compiles a standalone value circuit and loads its initial charge.
pub fn build_value_circuit(cfg: &ValueCircuitConfig) -> Result<(Network, ValueCircuitHandle), CircuitError> {
    let (g, frag) = value_circuit(cfg)?;
    let netlist = g.compile()?;
    let handle = frag.handle(&netlist);
    let mut net = netlist.instantiate()?;
    net.set_memory_charge(handle.memory, cfg.initial_charge())?;
    // Let the inverter settle onto the integrator's output.
    net.idle(2);
    Ok((net, handle))
}

/// Ports and output of a standalone gate or inverter.
#[derive(Debug, Clone)]
pub struct GateFragment {
    pub inputs: Vec<NodeId>,
    pub output: NodeId,
}

/// `n`-input coincidence gate: spikes at `t + 1` iff every input spiked at `t`.
pub fn and_gate(n_inputs: usize) -> Result<(CircuitGraph, GateFragment), CircuitError> {
    if n_inputs < 2 {
        return Err(CircuitError::GateInputs(n_inputs));
    }
    let mut g = CircuitGraph::new();
    let output = g.add_node(NodeKind::GateBank { inputs: n_inputs as u32 }, &[1], "and")?;
    let mut inputs = Vec::with_capacity(n_inputs);
    for k in 0..n_inputs {
        let p = g.add_node(NodeKind::Port, &[1], format!("and.in{k}"))?;
        g.connect(p, output, Pattern::OneToOne, GATE_WEIGHT)?;
        inputs.push(p);
    }
    Ok((g, GateFragment { inputs, output }))
}

/// Spikes at `t + 1` iff its input did not spike at `t`.
pub fn inverter() -> Result<(CircuitGraph, GateFragment), CircuitError> {
    let mut g = CircuitGraph::new();
    let input = g.add_node(NodeKind::Port, &[1], "inv.in")?;
    let output = g.add_node(NodeKind::TonicBank, &[1], "inv")?;
    g.connect(input, output, Pattern::OneToOne, -GATE_WEIGHT)?;
    Ok((g, GateFragment { inputs: vec![input], output }))
}

/// Bistable latch with set and reset ports; `inputs` is `[set, reset]`.
pub fn latch() -> Result<(CircuitGraph, GateFragment), CircuitError> {
    let mut g = CircuitGraph::new();
    let set = g.add_node(NodeKind::Port, &[1], "latch.set")?;
    let reset = g.add_node(NodeKind::Port, &[1], "latch.reset")?;
    let output = g.add_node(NodeKind::LatchBank, &[1], "latch")?;
    g.connect(set, output, Pattern::OneToOne, 1)?;
    g.connect(reset, output, Pattern::OneToOne, -1)?;
    Ok((g, GateFragment { inputs: vec![set, reset], output }))
}

/// Steps consumed by one [`vc_reinforce`] call.
pub fn reinforcement_window(theta: u32) -> usize {
    theta as usize + SETTLE_STEPS
}

/// Delivers one reinforcement spike to a standalone value circuit at
/// `phase` within a window of `θ` steps, then lets the resulting change land.
/// Always advances the network by [`reinforcement_window`] steps.
pub fn vc_reinforce(
    net: &mut Network,
    handle: &ValueCircuitHandle,
    signal: Reinforcement,
    phase: usize,
) -> Result<(), CircuitError> {
    let window = handle.theta as usize;
    if phase >= window {
        return Err(CircuitError::Phase { phase, window });
    }
    let line = match signal {
        Reinforcement::Reward => handle.reward_input,
        Reinforcement::Punish => handle.punish_input,
    }
    .ok_or_else(|| CircuitError::Config("value circuit has no reinforcement ports".into()))?;
    net.idle(phase);
    net.step_with(&[line], &[])?;
    net.idle(reinforcement_window(handle.theta) - phase - 1);
    Ok(())
}

/// Draws a uniform phase and reinforces.
pub fn vc_reinforce_random<R: Rng + ?Sized>(
    net: &mut Network,
    handle: &ValueCircuitHandle,
    signal: Reinforcement,
    rng: &mut R,
) -> Result<(), CircuitError> {
    let phase = rng.gen_range(0..handle.theta as usize);
    vc_reinforce(net, handle, signal, phase)
}

/// Rate estimate from the output spikes of a `window`-step run.
pub fn vc_read_rate(net: &mut Network, handle: &ValueCircuitHandle, window: usize) -> Result<f64, CircuitError> {
    if window == 0 {
        return Err(CircuitError::EmptyWindow);
    }
    let before = net.spike_counts()[handle.output];
    net.idle(window);
    let after = net.spike_counts()[handle.output];
    Ok((after - before) as f64 / window as f64)
}
