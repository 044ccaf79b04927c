// SPDX-License-Identifier: Apache-2.0

//! Circuit graphs and their lowering to flat netlists.
//!
//! A [`CircuitGraph`] holds banks of identical elements (latches, value
//! integrators, coincidence gates, tonic inverters, external ports) joined by
//! stereotyped connectivity patterns. [`CircuitGraph::compile`] expands the
//! banks into compartments and the patterns into synapses.
//!
//! Index ordering: nodes in insertion order, elements in row-major order,
//! and within an `SrifBank` element the memory compartment precedes the
//! soft-reset output. Ports contribute input lines, not compartments.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{CompartmentKind, CompartmentSpec, KernelError, Network, SynapseSpec};

/// Charge one gate input contributes; an `n`-input gate has threshold `n * GATE_WEIGHT`.
pub const GATE_WEIGHT: i32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("node dims must be non-empty and every extent >= 1, got {0:?}")]
    BadDims(Vec<usize>),
    #[error("invalid node parameters: {0}")]
    BadParams(String),
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("{pattern} mismatch: {detail}")]
    DimMismatch { pattern: &'static str, detail: String },
    #[error("edge weight must be non-zero")]
    ZeroWeight,
    #[error("a port cannot be the destination of an edge")]
    IntoPort,
    #[error("edge {edge} references missing node {node}")]
    Dangling { edge: usize, node: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NodeKind {
    LatchBank,
    /// Each element is a memory compartment coupled to a soft-reset
    /// integrator with threshold `theta`.
    SrifBank { theta: u32 },
    /// Each element is an `inputs`-way coincidence (AND) gate.
    GateBank { inputs: u32 },
    TonicBank,
    Port,
}

impl NodeKind {
    fn parts(self) -> usize {
        match self {
            NodeKind::SrifBank { .. } => 2,
            NodeKind::Port => 0,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::LatchBank => "latch-bank",
            NodeKind::SrifBank { .. } => "srif-bank",
            NodeKind::GateBank { .. } => "gate-bank",
            NodeKind::TonicBank => "tonic-bank",
            NodeKind::Port => "port",
        }
    }
}

/// Which compartment of an `SrifBank` element a coordinate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    Main,
    /// The memory compartment of an `SrifBank` element (`Main` is its output).
    Memory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub dims: Vec<usize>,
    pub label: String,
}

impl Node {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// User-facing connectivity patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    OneToOne,
    AllToAll,
    /// `src` (dims `a`) and `with` (dims `b`) meet in a per-pair AND gate whose
    /// output drives `dst` (dims `a ++ b`).
    OuterProduct { with: NodeId },
    /// Each element of `src` passes through an AND gate with `enable` before
    /// reaching `dst`. `enable` may be a single shared line, match `src`
    /// element for element, or cover a leading prefix of `src`'s dims.
    Gate { enable: NodeId },
}

/// Primitive wiring recorded on the graph; compile expands these to synapses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Wiring {
    OneToOne,
    AllToAll,
    /// `src` dims equal the leading dims of `dst`.
    Leading,
    /// `src` dims equal the trailing dims of `dst`.
    Trailing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub wiring: Wiring,
    pub weight: i32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CircuitGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl CircuitGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, GraphError> {
        self.nodes.get(id.0).ok_or(GraphError::UnknownNode(id.0))
    }

    pub fn add_node(&mut self, kind: NodeKind, dims: &[usize], label: impl Into<String>) -> Result<NodeId, GraphError> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(GraphError::BadDims(dims.to_vec()));
        }
        match kind {
            NodeKind::SrifBank { theta: 0 } => return Err(GraphError::BadParams("srif-bank theta must be >= 1".into())),
            NodeKind::GateBank { inputs: 0 } => return Err(GraphError::BadParams("gate-bank needs >= 1 input".into())),
            _ => {}
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { id, kind, dims: dims.to_vec(), label: label.into() });
        Ok(id)
    }

    /// Records an edge. Patterns that need intermediate gates add a gate-bank
    /// node and return its id.
    pub fn connect(&mut self, src: NodeId, dst: NodeId, pattern: Pattern, weight: i32) -> Result<Option<NodeId>, GraphError> {
        if weight == 0 {
            return Err(GraphError::ZeroWeight);
        }
        let src_dims = self.node(src)?.dims.clone();
        let dst_node = self.node(dst)?;
        if dst_node.kind == NodeKind::Port {
            return Err(GraphError::IntoPort);
        }
        let dst_dims = dst_node.dims.clone();
        let dst_label = dst_node.label.clone();
        match pattern {
            Pattern::OneToOne => {
                if src_dims != dst_dims {
                    return Err(mismatch("one-to-one", format!("{src_dims:?} vs {dst_dims:?}")));
                }
                self.push_edge(src, dst, Wiring::OneToOne, weight);
                Ok(None)
            }
            Pattern::AllToAll => {
                self.push_edge(src, dst, Wiring::AllToAll, weight);
                Ok(None)
            }
            Pattern::OuterProduct { with } => {
                let with_dims = self.node(with)?.dims.clone();
                let product: Vec<usize> = src_dims.iter().chain(&with_dims).copied().collect();
                if product != dst_dims {
                    return Err(mismatch(
                        "outer-product",
                        format!("{src_dims:?} x {with_dims:?} does not give {dst_dims:?}"),
                    ));
                }
                let pair = self.add_node(NodeKind::GateBank { inputs: 2 }, &dst_dims, format!("{dst_label}.pair"))?;
                self.push_edge(src, pair, Wiring::Leading, GATE_WEIGHT);
                self.push_edge(with, pair, Wiring::Trailing, GATE_WEIGHT);
                self.push_edge(pair, dst, Wiring::OneToOne, weight);
                Ok(Some(pair))
            }
            Pattern::Gate { enable } => {
                if src_dims != dst_dims {
                    return Err(mismatch("gate", format!("{src_dims:?} vs {dst_dims:?}")));
                }
                let gate = self.gate(src, enable, format!("{dst_label}.gate"))?;
                self.push_edge(gate, dst, Wiring::OneToOne, weight);
                Ok(Some(gate))
            }
        }
    }

    /// Adds a 2-input gate bank shaped like `src`, passing each element of
    /// `src` only while the matching `enable` line fires.
    pub fn gate(&mut self, src: NodeId, enable: NodeId, label: impl Into<String>) -> Result<NodeId, GraphError> {
        let src_dims = self.node(src)?.dims.clone();
        let enable_dims = self.node(enable)?.dims.clone();
        let enable_wiring = if enable_dims == src_dims {
            Wiring::OneToOne
        } else if enable_dims == [1] {
            Wiring::AllToAll
        } else if src_dims.starts_with(&enable_dims) {
            Wiring::Leading
        } else {
            return Err(mismatch("gate", format!("enable {enable_dims:?} does not cover {src_dims:?}")));
        };
        let gate = self.add_node(NodeKind::GateBank { inputs: 2 }, &src_dims, label)?;
        self.push_edge(src, gate, Wiring::OneToOne, GATE_WEIGHT);
        self.push_edge(enable, gate, enable_wiring, GATE_WEIGHT);
        Ok(gate)
    }

    /// Records a primitive wiring after checking its dimension constraint.
    pub fn wire(&mut self, src: NodeId, dst: NodeId, wiring: Wiring, weight: i32) -> Result<(), GraphError> {
        if weight == 0 {
            return Err(GraphError::ZeroWeight);
        }
        let s = self.node(src)?.dims.clone();
        let d = self.node(dst)?;
        if d.kind == NodeKind::Port {
            return Err(GraphError::IntoPort);
        }
        let ok = match wiring {
            Wiring::OneToOne => s == d.dims,
            Wiring::AllToAll => true,
            Wiring::Leading => d.dims.starts_with(&s),
            Wiring::Trailing => d.dims.ends_with(&s),
        };
        if !ok {
            return Err(mismatch("wiring", format!("{wiring:?} from {s:?} to {:?}", d.dims)));
        }
        self.push_edge(src, dst, wiring, weight);
        Ok(())
    }

    fn push_edge(&mut self, src: NodeId, dst: NodeId, wiring: Wiring, weight: i32) {
        self.edges.push(Edge { src, dst, wiring, weight });
    }

    /// Node-level cycles (strongly connected groups), each sorted by id.
    pub fn cycles(&self) -> Vec<Vec<NodeId>> {
        // Graphs are small (tens of nodes), so plain reachability sets suffice.
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.src.0].push(e.dst.0);
        }
        let reach = |from: usize| {
            let mut seen = vec![false; n];
            let mut stack = adj[from].clone();
            while let Some(v) = stack.pop() {
                if !std::mem::replace(&mut seen[v], true) {
                    stack.extend(&adj[v]);
                }
            }
            seen
        };
        let reachable: Vec<Vec<bool>> = (0..n).map(reach).collect();
        let mut assigned = vec![false; n];
        let mut out = Vec::new();
        for v in 0..n {
            if assigned[v] || !reachable[v][v] {
                continue;
            }
            let group: Vec<NodeId> = (0..n).filter(|&u| reachable[v][u] && reachable[u][v]).map(NodeId).collect();
            for u in &group {
                assigned[u.0] = true;
            }
            out.push(group);
        }
        out
    }

    /// Lowers the graph to a netlist.
    pub fn compile(&self) -> Result<Netlist, GraphError> {
        for (i, e) in self.edges.iter().enumerate() {
            for node in [e.src, e.dst] {
                if node.0 >= self.nodes.len() {
                    return Err(GraphError::Dangling { edge: i, node: node.0 });
                }
            }
        }

        let mut layout = Vec::with_capacity(self.nodes.len());
        let mut compartments = Vec::new();
        let mut inputs = Vec::new();
        for node in &self.nodes {
            let count = node.len();
            if node.kind == NodeKind::Port {
                layout.push(NodeLayout { id: node.id, label: node.label.clone(), kind: node.kind, dims: node.dims.clone(), base: inputs.len(), parts: 0 });
                for e in 0..count {
                    inputs.push(format!("{}{}", node.label, coord_suffix(&node.dims, e)));
                }
                continue;
            }
            let base = compartments.len();
            layout.push(NodeLayout { id: node.id, label: node.label.clone(), kind: node.kind, dims: node.dims.clone(), base, parts: node.kind.parts() });
            for e in 0..count {
                let name = format!("{}{}", node.label, coord_suffix(&node.dims, e));
                match node.kind {
                    NodeKind::LatchBank => compartments.push(CompartmentSpec::latch(name)),
                    NodeKind::TonicBank => compartments.push(CompartmentSpec::tonic(name)),
                    NodeKind::GateBank { inputs } => {
                        compartments.push(CompartmentSpec::hard_reset(inputs * GATE_WEIGHT as u32, name))
                    }
                    NodeKind::SrifBank { theta } => {
                        let memory = compartments.len();
                        compartments.push(CompartmentSpec::memory(theta, format!("{name}.mem")));
                        compartments.push(CompartmentSpec::soft_reset(theta, format!("{name}.out")).coupled_to(memory));
                    }
                    NodeKind::Port => unreachable!(),
                }
            }
        }

        let mut synapses = Vec::new();
        let mut input_synapses = Vec::new();
        for e in &self.edges {
            let s = &layout[e.src.0];
            let d = &layout[e.dst.0];
            let (s_len, d_len) = (s.len(), d.len());
            let out = if s.kind == NodeKind::Port { &mut input_synapses } else { &mut synapses };
            let mut push = |se: usize, de: usize| {
                out.push(SynapseSpec::new(s.source(se), d.target(de), e.weight));
            };
            match e.wiring {
                Wiring::OneToOne => (0..s_len).for_each(|i| push(i, i)),
                Wiring::AllToAll => {
                    for i in 0..s_len {
                        for j in 0..d_len {
                            push(i, j);
                        }
                    }
                }
                Wiring::Leading => {
                    let inner = d_len / s_len;
                    for i in 0..s_len {
                        for k in 0..inner {
                            push(i, i * inner + k);
                        }
                    }
                }
                Wiring::Trailing => {
                    let outer = d_len / s_len;
                    for i in 0..s_len {
                        for k in 0..outer {
                            push(i, k * s_len + i);
                        }
                    }
                }
            }
        }

        let warnings = self
            .cycles()
            .into_iter()
            .map(|group| {
                let names: Vec<&str> = group.iter().map(|id| self.nodes[id.0].label.as_str()).collect();
                format!("feedback cycle through {}", names.join(" -> "))
            })
            .collect::<Vec<_>>();
        for w in &warnings {
            log::debug!("{w}");
        }

        Ok(Netlist { compartments, synapses, inputs, input_synapses, nodes: layout, warnings })
    }
}

fn mismatch(pattern: &'static str, detail: String) -> GraphError {
    GraphError::DimMismatch { pattern, detail }
}

fn coord_suffix(dims: &[usize], flat: usize) -> String {
    let coord = unflatten(dims, flat);
    let mut s = String::from("[");
    for (i, c) in coord.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{c}");
    }
    s.push(']');
    s
}

pub fn flatten(dims: &[usize], coord: &[usize]) -> Option<usize> {
    if coord.len() != dims.len() {
        return None;
    }
    let mut flat = 0;
    for (&c, &d) in coord.iter().zip(dims) {
        if c >= d {
            return None;
        }
        flat = flat * d + c;
    }
    Some(flat)
}

pub fn unflatten(dims: &[usize], mut flat: usize) -> Vec<usize> {
    let mut coord = vec![0; dims.len()];
    for (slot, &d) in coord.iter_mut().zip(dims).rev() {
        *slot = flat % d;
        flat /= d;
    }
    coord
}

/// Where a node's elements landed in the netlist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub id: NodeId,
    pub label: String,
    #[serde(flatten)]
    pub kind: NodeKind,
    pub dims: Vec<usize>,
    /// First compartment index (first input line for ports).
    pub base: usize,
    /// Compartments per element (0 for ports).
    pub parts: usize,
}

impl NodeLayout {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn compartment_count(&self) -> usize {
        self.len() * self.parts
    }

    /// Compartment (or input line) that emits this element's spikes.
    fn source(&self, element: usize) -> usize {
        match self.kind {
            NodeKind::Port => self.base + element,
            NodeKind::SrifBank { .. } => self.base + element * 2 + 1,
            _ => self.base + element,
        }
    }

    /// Compartment that receives charge sent to this element.
    fn target(&self, element: usize) -> usize {
        match self.kind {
            NodeKind::SrifBank { .. } => self.base + element * 2,
            _ => self.base + element * self.parts,
        }
    }
}

/// The executable form of a circuit graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    pub compartments: Vec<CompartmentSpec>,
    pub synapses: Vec<SynapseSpec>,
    /// Input line labels.
    pub inputs: Vec<String>,
    /// Synapses whose `pre` is an input line.
    pub input_synapses: Vec<SynapseSpec>,
    pub nodes: Vec<NodeLayout>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl Netlist {
    pub fn compartment_count(&self) -> usize {
        self.compartments.len()
    }

    pub fn synapse_count(&self) -> usize {
        self.synapses.len() + self.input_synapses.len()
    }

    pub fn layout(&self, node: NodeId) -> &NodeLayout {
        &self.nodes[node.0]
    }

    /// Compartment index of `(node, coordinate, part)`; for a port, the input line.
    pub fn index(&self, node: NodeId, coord: &[usize], part: Part) -> Option<usize> {
        let l = self.nodes.get(node.0)?;
        let e = flatten(&l.dims, coord)?;
        match (l.kind, part) {
            (NodeKind::Port, Part::Main) => Some(l.base + e),
            (NodeKind::SrifBank { .. }, Part::Main) => Some(l.base + e * 2 + 1),
            (NodeKind::SrifBank { .. }, Part::Memory) => Some(l.base + e * 2),
            (_, Part::Main) => Some(l.base + e),
            _ => None,
        }
    }

    /// Inverse of [`Netlist::index`] for compartments.
    pub fn locate(&self, compartment: usize) -> Option<(NodeId, Vec<usize>, Part)> {
        let l = self
            .nodes
            .iter()
            .filter(|l| l.parts > 0)
            .find(|l| (l.base..l.base + l.compartment_count()).contains(&compartment))?;
        let offset = compartment - l.base;
        let coord = unflatten(&l.dims, offset / l.parts);
        let part = match (l.kind, offset % l.parts) {
            (NodeKind::SrifBank { .. }, 0) => Part::Memory,
            _ => Part::Main,
        };
        Some((l.id, coord, part))
    }

    /// Builds runtime state for this netlist.
    pub fn instantiate(&self) -> Result<Network, KernelError> {
        Network::with_inputs(&self.compartments, &self.synapses, self.inputs.len(), &self.input_synapses)
    }

    /// Stable JSON: one compartment, synapse or node per line.
    pub fn to_json(&self) -> String {
        fn section<T: Serialize>(out: &mut String, name: &str, items: &[T], last: bool) {
            let _ = write!(out, "  \"{name}\": [");
            for (i, item) in items.iter().enumerate() {
                out.push_str(if i == 0 { "\n    " } else { ",\n    " });
                out.push_str(&serde_json::to_string(item).expect("netlist entries serialize"));
            }
            out.push_str(if items.is_empty() { "]" } else { "\n  ]" });
            out.push_str(if last { "\n" } else { ",\n" });
        }
        let mut out = String::from("{\n");
        section(&mut out, "compartments", &self.compartments, false);
        section(&mut out, "synapses", &self.synapses, false);
        section(&mut out, "inputs", &self.inputs, false);
        section(&mut out, "input_synapses", &self.input_synapses, false);
        section(&mut out, "nodes", &self.nodes, true);
        out.push_str("}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Number of compartments of each kind.
    pub fn kind_counts(&self) -> Vec<(CompartmentKind, usize)> {
        use CompartmentKind::*;
        [HardResetIntegrator, SoftResetIntegrator, Tonic, Latch, Memory]
            .into_iter()
            .map(|k| (k, self.compartments.iter().filter(|c| c.kind == k).count()))
            .collect()
    }
}
