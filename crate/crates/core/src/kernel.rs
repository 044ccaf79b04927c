// SPDX-License-Identifier: Apache-2.0

//! Discrete-time, integer-only simulation of compartments and synapses.
//!
//! Every synapse has a fixed delay of one timestep: spikes emitted (or
//! external input lines driven) at step `t` change post-synaptic state at
//! step `t + 1`. Within a step, pending charge is applied first and then
//! each compartment runs its kind-specific update:
//!
//! * `HardResetIntegrator` spikes iff the charge received this step is at
//!   least its threshold; the charge is discarded every step, so it only
//!   detects single-step coincidences.
//! * `SoftResetIntegrator` adds its held memory charge `q_mem` to an
//!   accumulator, spikes when the accumulator reaches the threshold and
//!   subtracts the threshold. The firing rate is exactly `q_mem / θ`.
//! * `Memory` holds a persistent charge clamped to `[0, θ]`. It never spikes;
//!   a soft-reset integrator coupled to it reads its charge.
//! * `Tonic` spikes every step in which it received no inhibition.
//! * `Latch` turns on at net positive charge, off at net negative charge and
//!   spikes on every step while on.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("synapse {synapse}: compartment index {index} out of range (network has {len})")]
    SynapseIndex { synapse: usize, index: usize, len: usize },
    #[error("input synapse {synapse}: input line {index} out of range (network has {len})")]
    InputIndex { synapse: usize, index: usize, len: usize },
    #[error("synapse {synapse} has zero weight")]
    ZeroWeight { synapse: usize },
    #[error("synapse {synapse} excites tonic compartment {post}; tonic compartments accept only inhibition")]
    ExcitesTonic { synapse: usize, post: usize },
    #[error("compartment {index} ({label}): threshold must be >= 1 for {kind:?}")]
    BadThreshold { index: usize, label: String, kind: CompartmentKind },
    #[error("compartment {index}: memory coupling {memory} is not a memory compartment with the same threshold")]
    BadCoupling { index: usize, memory: usize },
    #[error("duplicate compartment label {0:?}")]
    DuplicateLabel(String),
    #[error("external spike index {index} out of range (network has {len} compartments)")]
    ExternalIndex { index: usize, len: usize },
    #[error("external input line {index} out of range (network has {len} lines)")]
    ExternalInput { index: usize, len: usize },
    #[error("compartment {0} does not hold a memory charge")]
    NotMemory(usize),
    #[error("charge {value} outside [0, {threshold}] for compartment {index}")]
    ChargeRange { index: usize, value: i64, threshold: u32 },
    #[error("window length must be at least 1")]
    EmptyWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompartmentKind {
    HardResetIntegrator,
    SoftResetIntegrator,
    Tonic,
    Latch,
    Memory,
}

impl CompartmentKind {
    fn uses_threshold(self) -> bool {
        !matches!(self, CompartmentKind::Tonic | CompartmentKind::Latch)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompartmentSpec {
    pub kind: CompartmentKind,
    pub threshold: u32,
    /// For a soft-reset integrator: index of the memory compartment whose
    /// charge drives it. Without a coupling the integrator holds its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
    #[serde(default)]
    pub label: String,
}

impl CompartmentSpec {
    pub fn new(kind: CompartmentKind, threshold: u32, label: impl Into<String>) -> Self {
        Self { kind, threshold, memory: None, label: label.into() }
    }

    pub fn hard_reset(threshold: u32, label: impl Into<String>) -> Self {
        Self::new(CompartmentKind::HardResetIntegrator, threshold, label)
    }

    pub fn soft_reset(threshold: u32, label: impl Into<String>) -> Self {
        Self::new(CompartmentKind::SoftResetIntegrator, threshold, label)
    }

    pub fn memory(threshold: u32, label: impl Into<String>) -> Self {
        Self::new(CompartmentKind::Memory, threshold, label)
    }

    pub fn tonic(label: impl Into<String>) -> Self {
        Self::new(CompartmentKind::Tonic, 0, label)
    }

    pub fn latch(label: impl Into<String>) -> Self {
        Self::new(CompartmentKind::Latch, 0, label)
    }

    pub fn coupled_to(mut self, memory: usize) -> Self {
        self.memory = Some(memory);
        self
    }
}

/// A synapse between two compartments, or from an external input line when
/// it appears in the input-synapse list (then `pre` is the line index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynapseSpec {
    pub pre: usize,
    pub post: usize,
    pub weight: i32,
}

impl SynapseSpec {
    pub fn new(pre: usize, post: usize, weight: i32) -> Self {
        Self { pre, post, weight }
    }
}

/// Compressed adjacency: outgoing synapses of each source, in declaration order.
#[derive(Debug, Clone, Default)]
struct Fanout {
    start: Vec<u32>,
    post: Vec<u32>,
    weight: Vec<i32>,
}

impl Fanout {
    fn build(n_sources: usize, synapses: &[SynapseSpec]) -> Self {
        let mut start = vec![0u32; n_sources + 1];
        for s in synapses {
            start[s.pre + 1] += 1;
        }
        for i in 0..n_sources {
            start[i + 1] += start[i];
        }
        let mut cursor = start.clone();
        let mut post = vec![0u32; synapses.len()];
        let mut weight = vec![0i32; synapses.len()];
        for s in synapses {
            let slot = cursor[s.pre] as usize;
            post[slot] = s.post as u32;
            weight[slot] = s.weight;
            cursor[s.pre] += 1;
        }
        Self { start, post, weight }
    }

    #[inline]
    fn of(&self, source: usize) -> std::ops::Range<usize> {
        self.start[source] as usize..self.start[source + 1] as usize
    }
}

/// External drive for one timestep: input lines to pulse and compartments
/// forced to spike.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stimulus {
    pub inputs: Vec<usize>,
    pub forced: Vec<usize>,
}

impl Stimulus {
    pub fn inputs(inputs: impl Into<Vec<usize>>) -> Self {
        Self { inputs: inputs.into(), forced: Vec::new() }
    }

    pub fn forced(forced: impl Into<Vec<usize>>) -> Self {
        Self { inputs: Vec::new(), forced: forced.into() }
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty() && self.forced.is_empty()
    }
}

/// Window-relative timestep → stimulus.
pub type Schedule = BTreeMap<usize, Stimulus>;

/// Sparse spike raster: for each timestep of a window, the sorted indices of
/// the compartments that spiked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeRaster {
    pub start: u64,
    pub n_compartments: usize,
    pub rows: Vec<Vec<u32>>,
}

impl SpikeRaster {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn spiked(&self, step: usize, compartment: usize) -> bool {
        self.rows[step].binary_search(&(compartment as u32)).is_ok()
    }

    pub fn total(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.n_compartments];
        for row in &self.rows {
            for &i in row {
                sums[i as usize] += 1;
            }
        }
        sums
    }

    /// Spike train of one compartment as a bit vector over the window.
    pub fn train(&self, compartment: usize) -> Vec<bool> {
        (0..self.rows.len()).map(|t| self.spiked(t, compartment)).collect()
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn extend(&mut self, other: SpikeRaster) {
        debug_assert_eq!(self.start + self.rows.len() as u64, other.start);
        self.rows.extend(other.rows);
    }

    /// CSV with columns `timestep,compartment`, one row per spike.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestep,compartment\n");
        for (k, row) in self.rows.iter().enumerate() {
            for &i in row {
                let _ = writeln!(out, "{},{}", self.start + k as u64, i);
            }
        }
        out
    }
}

/// Runtime state of a built network.
#[derive(Debug, Clone)]
pub struct Network {
    kinds: Vec<CompartmentKind>,
    thresholds: Vec<i32>,
    labels: Vec<String>,
    /// Slot whose `q_mem` drives each soft-reset integrator.
    drive: Vec<u32>,
    accumulator: Vec<i32>,
    q_mem: Vec<i32>,
    latch_on: Vec<bool>,
    synapses: Fanout,
    input_synapses: Fanout,
    n_inputs: usize,

    soft_reset: Vec<u32>,
    tonic: Vec<u32>,
    latches: Vec<u32>,

    excitation: Vec<i32>,
    inhibition: Vec<i32>,
    touched: Vec<u32>,
    is_touched: Vec<bool>,
    fired: Vec<bool>,
    spikes: Vec<u32>,

    counts: Vec<u64>,
    total_spikes: u64,
    time: u64,
}

impl Network {
    /// Builds a network with no external input lines.
    pub fn new(compartments: &[CompartmentSpec], synapses: &[SynapseSpec]) -> Result<Self, KernelError> {
        Self::with_inputs(compartments, synapses, 0, &[])
    }

    /// Builds a network with `n_inputs` external input lines feeding the
    /// compartments listed in `input_synapses` (whose `pre` is a line index).
    pub fn with_inputs(
        compartments: &[CompartmentSpec],
        synapses: &[SynapseSpec],
        n_inputs: usize,
        input_synapses: &[SynapseSpec],
    ) -> Result<Self, KernelError> {
        let n = compartments.len();
        for (index, c) in compartments.iter().enumerate() {
            if c.kind.uses_threshold() && c.threshold == 0 {
                return Err(KernelError::BadThreshold { index, label: c.label.clone(), kind: c.kind });
            }
            if let Some(memory) = c.memory {
                let ok = c.kind == CompartmentKind::SoftResetIntegrator
                    && compartments
                        .get(memory)
                        .is_some_and(|m| m.kind == CompartmentKind::Memory && m.threshold == c.threshold);
                if !ok {
                    return Err(KernelError::BadCoupling { index, memory });
                }
            }
        }
        for (i, s) in synapses.iter().enumerate() {
            for index in [s.pre, s.post] {
                if index >= n {
                    return Err(KernelError::SynapseIndex { synapse: i, index, len: n });
                }
            }
            check_weight(i, s, compartments)?;
        }
        for (i, s) in input_synapses.iter().enumerate() {
            if s.pre >= n_inputs {
                return Err(KernelError::InputIndex { synapse: i, index: s.pre, len: n_inputs });
            }
            if s.post >= n {
                return Err(KernelError::SynapseIndex { synapse: i, index: s.post, len: n });
            }
            check_weight(i, s, compartments)?;
        }

        let kinds: Vec<_> = compartments.iter().map(|c| c.kind).collect();
        let select = |k: CompartmentKind| -> Vec<u32> {
            kinds.iter().enumerate().filter(|(_, &x)| x == k).map(|(i, _)| i as u32).collect()
        };
        let drive = compartments
            .iter()
            .enumerate()
            .map(|(i, c)| c.memory.unwrap_or(i) as u32)
            .collect();

        Ok(Self {
            thresholds: compartments.iter().map(|c| c.threshold.min(i32::MAX as u32) as i32).collect(),
            labels: compartments.iter().map(|c| c.label.clone()).collect(),
            drive,
            accumulator: vec![0; n],
            q_mem: vec![0; n],
            latch_on: vec![false; n],
            synapses: Fanout::build(n, synapses),
            input_synapses: Fanout::build(n_inputs, input_synapses),
            n_inputs,
            soft_reset: select(CompartmentKind::SoftResetIntegrator),
            tonic: select(CompartmentKind::Tonic),
            latches: select(CompartmentKind::Latch),
            excitation: vec![0; n],
            inhibition: vec![0; n],
            touched: Vec::new(),
            is_touched: vec![false; n],
            fired: vec![false; n],
            spikes: Vec::new(),
            counts: vec![0; n],
            total_spikes: 0,
            time: 0,
            kinds,
        })
    }

    /// Like [`Network::new`] but rejects duplicate non-empty labels.
    pub fn with_unique_labels(
        compartments: &[CompartmentSpec],
        synapses: &[SynapseSpec],
    ) -> Result<Self, KernelError> {
        let mut seen = std::collections::HashSet::new();
        for c in compartments {
            if !c.label.is_empty() && !seen.insert(c.label.as_str()) {
                return Err(KernelError::DuplicateLabel(c.label.clone()));
            }
        }
        Self::new(compartments, synapses)
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn kind(&self, index: usize) -> CompartmentKind {
        self.kinds[index]
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    /// Advances one timestep, forcing the listed compartments to spike.
    pub fn step(&mut self, external: &[usize]) -> Result<&[u32], KernelError> {
        self.step_with(&[], external)
    }

    /// Advances one timestep. Spikes are returned in evaluation order, which
    /// is deterministic but not sorted.
    pub fn step_with(&mut self, inputs: &[usize], forced: &[usize]) -> Result<&[u32], KernelError> {
        if let Some(&index) = forced.iter().find(|&&i| i >= self.len()) {
            return Err(KernelError::ExternalIndex { index, len: self.len() });
        }
        if let Some(&index) = inputs.iter().find(|&&i| i >= self.n_inputs) {
            return Err(KernelError::ExternalInput { index, len: self.n_inputs });
        }
        self.advance(inputs, forced);
        Ok(&self.spikes)
    }

    /// Advances `steps` timesteps with no external drive.
    pub fn idle(&mut self, steps: usize) {
        for _ in 0..steps {
            self.advance(&[], &[]);
        }
    }

    fn advance(&mut self, inputs: &[usize], forced: &[usize]) {
        self.spikes.clear();

        // Charges delivered by last step's spikes.
        for k in 0..self.touched.len() {
            let i = self.touched[k] as usize;
            let exc = self.excitation[i];
            let inh = self.inhibition[i];
            let net = exc.saturating_add(inh);
            match self.kinds[i] {
                CompartmentKind::HardResetIntegrator => {
                    if net >= self.thresholds[i] {
                        self.fire(i);
                    }
                }
                CompartmentKind::Memory | CompartmentKind::SoftResetIntegrator => {
                    let slot = self.drive[i] as usize;
                    let ceiling = self.thresholds[slot];
                    self.q_mem[slot] = self.q_mem[slot].saturating_add(net).clamp(0, ceiling);
                }
                CompartmentKind::Latch => {
                    if net > 0 {
                        self.latch_on[i] = true;
                    } else if net < 0 {
                        self.latch_on[i] = false;
                    }
                }
                // Tonic compartments read `inhibition` below.
                CompartmentKind::Tonic => {}
            }
        }

        for k in 0..self.soft_reset.len() {
            let i = self.soft_reset[k] as usize;
            let q = self.q_mem[self.drive[i] as usize];
            let acc = self.accumulator[i].saturating_add(q);
            if acc >= self.thresholds[i] {
                self.accumulator[i] = acc - self.thresholds[i];
                self.fire(i);
            } else {
                self.accumulator[i] = acc;
            }
        }
        for k in 0..self.tonic.len() {
            let i = self.tonic[k] as usize;
            if self.inhibition[i] == 0 {
                self.fire(i);
            }
        }
        for k in 0..self.latches.len() {
            let i = self.latches[k] as usize;
            if self.latch_on[i] {
                self.fire(i);
            }
        }
        for &i in forced {
            if !self.fired[i] {
                self.fire(i);
            }
        }

        for &i in &self.touched {
            self.excitation[i as usize] = 0;
            self.inhibition[i as usize] = 0;
            self.is_touched[i as usize] = false;
        }
        self.touched.clear();

        for k in 0..self.spikes.len() {
            let i = self.spikes[k] as usize;
            self.fired[i] = false;
            for s in self.synapses.of(i) {
                let post = self.synapses.post[s];
                let weight = self.synapses.weight[s];
                self.deliver(post, weight);
            }
        }
        for &line in inputs {
            for s in self.input_synapses.of(line) {
                let post = self.input_synapses.post[s];
                let weight = self.input_synapses.weight[s];
                self.deliver(post, weight);
            }
        }
        self.total_spikes += self.spikes.len() as u64;
        self.time += 1;
    }

    #[inline]
    fn fire(&mut self, i: usize) {
        self.fired[i] = true;
        self.counts[i] += 1;
        self.spikes.push(i as u32);
    }

    #[inline]
    fn deliver(&mut self, post: u32, weight: i32) {
        let p = post as usize;
        if weight > 0 {
            self.excitation[p] = self.excitation[p].saturating_add(weight);
        } else {
            self.inhibition[p] = self.inhibition[p].saturating_add(weight);
        }
        if !self.is_touched[p] {
            self.is_touched[p] = true;
            self.touched.push(post);
        }
    }

    /// Runs `steps` timesteps, applying `schedule` (keyed by window-relative
    /// step), and returns the raster of the window.
    pub fn run_window(&mut self, steps: usize, schedule: &Schedule) -> Result<SpikeRaster, KernelError> {
        if steps == 0 {
            return Err(KernelError::EmptyWindow);
        }
        let empty = Stimulus::default();
        let start = self.time;
        let mut rows = Vec::with_capacity(steps);
        for t in 0..steps {
            let stim = schedule.get(&t).unwrap_or(&empty);
            let spikes = self.step_with(&stim.inputs, &stim.forced)?;
            let mut row = spikes.to_vec();
            row.sort_unstable();
            rows.push(row);
        }
        Ok(SpikeRaster { start, n_compartments: self.len(), rows })
    }

    /// Lifetime spike totals per compartment.
    pub fn spike_counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_spikes(&self) -> u64 {
        self.total_spikes
    }

    pub fn is_latched(&self, index: usize) -> bool {
        self.latch_on[index]
    }

    /// Memory charge read by `index` (a memory compartment or a soft-reset
    /// integrator).
    pub fn memory_charge(&self, index: usize) -> Result<u32, KernelError> {
        match self.kinds[index] {
            CompartmentKind::Memory | CompartmentKind::SoftResetIntegrator => {
                Ok(self.q_mem[self.drive[index] as usize] as u32)
            }
            _ => Err(KernelError::NotMemory(index)),
        }
    }

    pub fn set_memory_charge(&mut self, index: usize, value: u32) -> Result<(), KernelError> {
        if !matches!(self.kinds[index], CompartmentKind::Memory | CompartmentKind::SoftResetIntegrator) {
            return Err(KernelError::NotMemory(index));
        }
        let slot = self.drive[index] as usize;
        let threshold = self.thresholds[slot] as u32;
        if value > threshold {
            return Err(KernelError::ChargeRange { index, value: value as i64, threshold });
        }
        self.q_mem[slot] = value as i32;
        Ok(())
    }

    pub fn accumulator(&self, index: usize) -> i32 {
        self.accumulator[index]
    }

    /// Sets a soft-reset integrator's accumulator; must lie in `[0, θ)`.
    pub fn set_accumulator(&mut self, index: usize, value: u32) -> Result<(), KernelError> {
        if self.kinds[index] != CompartmentKind::SoftResetIntegrator {
            return Err(KernelError::NotMemory(index));
        }
        let threshold = self.thresholds[index] as u32;
        if value >= threshold {
            return Err(KernelError::ChargeRange { index, value: value as i64, threshold });
        }
        self.accumulator[index] = value as i32;
        Ok(())
    }
}

fn check_weight(i: usize, s: &SynapseSpec, compartments: &[CompartmentSpec]) -> Result<(), KernelError> {
    if s.weight == 0 {
        return Err(KernelError::ZeroWeight { synapse: i });
    }
    if s.weight > 0 && compartments[s.post].kind == CompartmentKind::Tonic {
        return Err(KernelError::ExcitesTonic { synapse: i, post: s.post });
    }
    Ok(())
}
