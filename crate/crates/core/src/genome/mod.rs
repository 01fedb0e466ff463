//! CPPN genotypes.
//!
//! A [`Genome`] is a feed-forward graph with four coordinate inputs
//! `(x1, y1, x2, y2)` and one output. Connections carry run-global
//! innovation numbers handed out by an [`InnovationRegistry`], which is what
//! lets [`crossover`] align genes between parents.

mod cppn;
mod text;
mod variation;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cppn::{query_cppn, Cppn};
pub use text::parse_genome;
pub use variation::{
    crossover, init_genome, mutate, mutate_traced, reproduce, reproduce_traced, MutationTrace,
    OperatorOutcome, ReproductionTrace, VariationRates,
};

pub type NodeId = u32;
pub type Innovation = u64;

/// Node ids of the coordinate inputs, in query order.
pub const INPUT_IDS: [NodeId; 4] = [0, 1, 2, 3];
pub const OUTPUT_ID: NodeId = 4;
const FIRST_HIDDEN_ID: NodeId = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    Sine,
    Gaussian,
    Abs,
}

impl Activation {
    pub const ALL: [Activation; 6] = [
        Activation::Identity,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Sine,
        Activation::Gaussian,
        Activation::Abs,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Sine => x.sin(),
            Activation::Gaussian => (-x * x).exp(),
            Activation::Abs => x.abs(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Sine => "sine",
            Activation::Gaussian => "gaussian",
            Activation::Abs => "abs",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Input,
    Hidden,
    Output,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::Hidden => "hidden",
            NodeKind::Output => "output",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "input" => Some(NodeKind::Input),
            "hidden" => Some(NodeKind::Hidden),
            "output" => Some(NodeKind::Output),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeGene {
    pub id: NodeId,
    pub activation: Activation,
    pub kind: NodeKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGene {
    pub source: NodeId,
    pub target: NodeId,
    pub weight: f64,
    pub enabled: bool,
    pub innovation: Innovation,
}

#[derive(Debug, Error, PartialEq)]
pub enum GenomeError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("genome must have input nodes 0..4 and output node 4")]
    BadInterface,
    #[error("connection {innovation} references unknown node {node}")]
    UnknownNode { innovation: Innovation, node: NodeId },
    #[error("duplicate innovation number {0}")]
    DuplicateInnovation(Innovation),
    #[error("duplicate connection {0} -> {1}")]
    DuplicatePair(NodeId, NodeId),
    #[error("connection {0} targets an input node")]
    TargetsInput(Innovation),
    #[error("enabled connections contain a cycle")]
    Cycle,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Genotype with nodes kept sorted by id and connections by innovation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    nodes: Vec<NodeGene>,
    connections: Vec<ConnectionGene>,
}

impl Genome {
    /// Build and validate a genome from raw gene lists.
    pub fn from_parts(
        mut nodes: Vec<NodeGene>,
        mut connections: Vec<ConnectionGene>,
    ) -> Result<Self, GenomeError> {
        nodes.sort_by_key(|n| n.id);
        connections.sort_by_key(|c| c.innovation);
        let g = Genome { nodes, connections };
        g.validate()?;
        Ok(g)
    }

    /// Unchecked constructor for operators that maintain the invariants.
    pub(crate) fn from_sorted(nodes: Vec<NodeGene>, connections: Vec<ConnectionGene>) -> Self {
        let g = Genome { nodes, connections };
        debug_assert_eq!(g.validate(), Ok(()));
        g
    }

    pub fn nodes(&self) -> &[NodeGene] {
        &self.nodes
    }

    pub fn connections(&self) -> &[ConnectionGene] {
        &self.connections
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeGene> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn hidden_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Hidden)
            .count()
    }

    pub fn innovations(&self) -> impl Iterator<Item = Innovation> + '_ {
        self.connections.iter().map(|c| c.innovation)
    }

    pub fn validate(&self) -> Result<(), GenomeError> {
        let mut seen = HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                return Err(GenomeError::DuplicateNode(n.id));
            }
        }
        for (i, id) in INPUT_IDS.iter().enumerate() {
            match self.nodes.get(i) {
                Some(n) if n.id == *id && n.kind == NodeKind::Input => {}
                _ => return Err(GenomeError::BadInterface),
            }
        }
        let inputs = self.nodes.iter().filter(|n| n.kind == NodeKind::Input).count();
        let outputs: Vec<_> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Output)
            .collect();
        if inputs != INPUT_IDS.len() || outputs.len() != 1 || outputs[0].id != OUTPUT_ID {
            return Err(GenomeError::BadInterface);
        }

        let mut innovations = HashSet::new();
        let mut pairs = HashSet::new();
        for c in &self.connections {
            for node in [c.source, c.target] {
                if self.node(node).is_none() {
                    return Err(GenomeError::UnknownNode {
                        innovation: c.innovation,
                        node,
                    });
                }
            }
            if self.node(c.target).map(|n| n.kind) == Some(NodeKind::Input) {
                return Err(GenomeError::TargetsInput(c.innovation));
            }
            if !innovations.insert(c.innovation) {
                return Err(GenomeError::DuplicateInnovation(c.innovation));
            }
            if c.enabled && !pairs.insert((c.source, c.target)) {
                return Err(GenomeError::DuplicatePair(c.source, c.target));
            }
        }
        if topological_order(&self.nodes, &self.connections).is_none() {
            return Err(GenomeError::Cycle);
        }
        Ok(())
    }

    pub fn is_acyclic(&self) -> bool {
        topological_order(&self.nodes, &self.connections).is_some()
    }

    pub fn to_text(&self) -> String {
        text::write_genome(self)
    }
}

/// Kahn's algorithm over enabled connections. Returns node indices in a
/// deterministic topological order (ties broken by node order), or `None`
/// when the enabled graph has a cycle.
pub(crate) fn topological_order(
    nodes: &[NodeGene],
    connections: &[ConnectionGene],
) -> Option<Vec<usize>> {
    let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    let mut indegree = vec![0usize; nodes.len()];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for c in connections.iter().filter(|c| c.enabled) {
        let (s, t) = (index[&c.source], index[&c.target]);
        out[s].push(t);
        indegree[t] += 1;
    }
    let mut ready: std::collections::BTreeSet<usize> =
        (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &t in &out[i] {
            indegree[t] -= 1;
            if indegree[t] == 0 {
                ready.insert(t);
            }
        }
    }
    (order.len() == nodes.len()).then_some(order)
}

/// True when `from` reaches `to` through enabled connections.
pub(crate) fn reaches(connections: &[ConnectionGene], from: NodeId, to: NodeId) -> bool {
    if from == to {
        return true;
    }
    let mut stack = vec![from];
    let mut seen = HashSet::new();
    while let Some(n) = stack.pop() {
        if !seen.insert(n) {
            continue;
        }
        for c in connections.iter().filter(|c| c.enabled && c.source == n) {
            if c.target == to {
                return true;
            }
            stack.push(c.target);
        }
    }
    false
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum ChangeKind {
    AddConnection,
    SplitConnection,
}

/// Run-global bookkeeping of structural changes so identical mutations in
/// different genomes receive identical numbers.
#[derive(Clone, Debug, Default)]
pub struct InnovationRegistry {
    changes: HashMap<(NodeId, NodeId, ChangeKind), u64>,
    next_innovation: Innovation,
    next_node: NodeId,
}

impl InnovationRegistry {
    pub fn new() -> Self {
        Self {
            changes: HashMap::new(),
            next_innovation: 0,
            next_node: FIRST_HIDDEN_ID,
        }
    }

    /// Innovation number of the connection `source -> target`.
    pub fn connection(&mut self, source: NodeId, target: NodeId) -> Innovation {
        let key = (source, target, ChangeKind::AddConnection);
        if let Some(&inn) = self.changes.get(&key) {
            return inn;
        }
        let inn = self.next_innovation;
        self.next_innovation += 1;
        self.changes.insert(key, inn);
        inn
    }

    /// Id of the hidden node created by splitting `source -> target`.
    pub fn split_node(&mut self, source: NodeId, target: NodeId) -> NodeId {
        let key = (source, target, ChangeKind::SplitConnection);
        if let Some(&id) = self.changes.get(&key) {
            return id as NodeId;
        }
        let id = self.next_node;
        self.next_node += 1;
        self.changes.insert(key, id as u64);
        id
    }

    pub(crate) fn peek_split(&self, source: NodeId, target: NodeId) -> Option<NodeId> {
        self.changes
            .get(&(source, target, ChangeKind::SplitConnection))
            .map(|&id| id as NodeId)
    }

    pub fn innovation_count(&self) -> Innovation {
        self.next_innovation
    }
}
