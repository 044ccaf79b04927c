// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the kernel benchmarks.

use dml_core::agent::{Agent, AgentConfig};
use dml_core::circuits::{build_value_circuit, ValueCircuitConfig};
use dml_core::kernel::Network;

/// A standalone value circuit at rate 1/2.
pub fn value_circuit() -> Network {
    build_value_circuit(&ValueCircuitConfig::default()).expect("default config is valid").0
}

/// A fresh agent of the given shape.
pub fn agent(n_states: usize, n_actions: usize) -> Agent {
    Agent::new(AgentConfig::new(n_states, n_actions)).expect("valid shape")
}
