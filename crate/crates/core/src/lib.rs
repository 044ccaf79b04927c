// SPDX-License-Identifier: Apache-2.0

//! Rate-coded dual-memory reinforcement learner on an integer spiking
//! simulator.
//!
//! Layers, bottom up:
//!
//! * [`kernel`]: discrete-time compartments and unit-delay synapses;
//! * [`circuits`]: AND gates, inverters, latches and the value circuit;
//! * [`graph`]: node banks and connection patterns lowered to a netlist;
//! * [`agent`]: decoder, short-term memory, long-term memory and encoder;
//! * [`env`], [`baseline`], [`metrics`], [`harness`]: tasks, references,
//!   evaluation and experiment runs.

pub mod agent;
pub mod baseline;
pub mod circuits;
pub mod env;
pub mod graph;
pub mod harness;
pub mod kernel;
pub mod learner;
pub mod metrics;
pub mod seed;
pub mod table;

pub use agent::{Agent, AgentConfig, AgentError, Policy, WindowStats};
pub use circuits::{Reinforcement, ValueCircuitConfig, ValueCircuitHandle};
pub use env::{Environment, Outcome, StepResult};
pub use graph::{CircuitGraph, Netlist, NodeId, NodeKind, Part, Pattern};
pub use kernel::{CompartmentKind, CompartmentSpec, KernelError, Network, SynapseSpec};
pub use learner::{Learner, McAgent};
pub use table::ValueTable;
