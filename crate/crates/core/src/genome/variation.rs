//! Initialization, NEAT-style mutation, and innovation-aligned crossover.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    reaches, Activation, ConnectionGene, Genome, InnovationRegistry, NodeGene, NodeId, NodeKind,
    INPUT_IDS, OUTPUT_ID,
};

/// Chance that a fresh genome gets one or two spliced-in hidden nodes.
const INIT_HIDDEN_PROB: f64 = 0.5;
/// Chance a gene enabled in one parent and disabled in the other ends up
/// disabled in the child.
const INHERIT_DISABLED_PROB: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationRates {
    pub weight_mutation_prob: f64,
    pub mutation_sigma: f64,
    pub add_connection_prob: f64,
    pub add_node_prob: f64,
    pub crossover_prob: f64,
    pub init_weight_sigma: f64,
}

impl Default for VariationRates {
    fn default() -> Self {
        Self {
            weight_mutation_prob: 0.8,
            mutation_sigma: 0.5,
            add_connection_prob: 0.05,
            add_node_prob: 0.03,
            crossover_prob: 0.9,
            init_weight_sigma: 3.0,
        }
    }
}

impl VariationRates {
    /// Every rate zero; variation becomes the identity.
    pub fn frozen() -> Self {
        Self {
            weight_mutation_prob: 0.0,
            add_connection_prob: 0.0,
            add_node_prob: 0.0,
            crossover_prob: 0.0,
            ..Self::default()
        }
    }
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated positive")
}

fn random_activation<R: Rng + ?Sized>(rng: &mut R) -> Activation {
    Activation::ALL[rng.random_range(0..Activation::ALL.len())]
}

/// Coordinate inputs fully connected to the output, optionally with one
/// or two hidden nodes spliced into random connections.
pub fn init_genome<R: Rng + ?Sized>(
    rng: &mut R,
    rates: &VariationRates,
    registry: &mut InnovationRegistry,
) -> Genome {
    let dist = normal(rates.init_weight_sigma);
    let mut nodes: Vec<NodeGene> = INPUT_IDS
        .iter()
        .map(|&id| NodeGene {
            id,
            activation: Activation::Identity,
            kind: NodeKind::Input,
        })
        .collect();
    nodes.push(NodeGene {
        id: OUTPUT_ID,
        activation: Activation::Identity,
        kind: NodeKind::Output,
    });
    let connections = INPUT_IDS
        .iter()
        .map(|&src| ConnectionGene {
            source: src,
            target: OUTPUT_ID,
            weight: dist.sample(rng),
            enabled: true,
            innovation: registry.connection(src, OUTPUT_ID),
        })
        .collect();
    let mut genome = Genome::from_sorted(nodes, connections);

    if rng.random_bool(INIT_HIDDEN_PROB) {
        let count = rng.random_range(1..=2);
        for _ in 0..count {
            let sites = split_sites(&genome, registry);
            if sites.is_empty() {
                break;
            }
            let pick = sites[rng.random_range(0..sites.len())];
            let activation = random_activation(rng);
            genome = split_connection(&genome, pick, activation, registry);
        }
    }
    genome
}

/// What happened to one mutation operator during a call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorOutcome {
    NotDrawn,
    Applied,
    NoLegalSite,
}

impl OperatorOutcome {
    pub fn drawn(self) -> bool {
        self != OperatorOutcome::NotDrawn
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MutationTrace {
    pub weights: OperatorOutcome,
    pub add_connection: OperatorOutcome,
    pub add_node: OperatorOutcome,
}

pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    rng: &mut R,
    rates: &VariationRates,
    registry: &mut InnovationRegistry,
) -> Genome {
    mutate_traced(genome, rng, rates, registry).0
}

/// Weight perturbation, add-connection, and add-node, each drawn
/// independently (in that order) at its configured rate.
pub fn mutate_traced<R: Rng + ?Sized>(
    genome: &Genome,
    rng: &mut R,
    rates: &VariationRates,
    registry: &mut InnovationRegistry,
) -> (Genome, MutationTrace) {
    let mut g = genome.clone();
    let mut trace = MutationTrace {
        weights: OperatorOutcome::NotDrawn,
        add_connection: OperatorOutcome::NotDrawn,
        add_node: OperatorOutcome::NotDrawn,
    };

    if rng.random_bool(rates.weight_mutation_prob) {
        let dist = normal(rates.mutation_sigma);
        for c in &mut g.connections {
            c.weight += dist.sample(rng);
        }
        trace.weights = OperatorOutcome::Applied;
    }

    if rng.random_bool(rates.add_connection_prob) {
        let candidates = connection_sites(&g);
        trace.add_connection = if candidates.is_empty() {
            OperatorOutcome::NoLegalSite
        } else {
            let (source, target) = candidates[rng.random_range(0..candidates.len())];
            let gene = ConnectionGene {
                source,
                target,
                weight: normal(rates.init_weight_sigma).sample(rng),
                enabled: true,
                innovation: registry.connection(source, target),
            };
            g = with_connection(&g, gene);
            OperatorOutcome::Applied
        };
    }

    if rng.random_bool(rates.add_node_prob) {
        let sites = split_sites(&g, registry);
        trace.add_node = if sites.is_empty() {
            OperatorOutcome::NoLegalSite
        } else {
            let pick = sites[rng.random_range(0..sites.len())];
            let activation = random_activation(rng);
            g = split_connection(&g, pick, activation, registry);
            OperatorOutcome::Applied
        };
    }

    (g, trace)
}

/// All `(source, target)` pairs that can be connected without duplicating
/// an existing gene or closing a cycle, in deterministic order.
fn connection_sites(g: &Genome) -> Vec<(NodeId, NodeId)> {
    let existing: BTreeSet<(NodeId, NodeId)> =
        g.connections.iter().map(|c| (c.source, c.target)).collect();
    let mut out = Vec::new();
    for s in g.nodes.iter().filter(|n| n.kind != NodeKind::Output) {
        for t in g.nodes.iter().filter(|n| n.kind != NodeKind::Input) {
            if s.id == t.id || existing.contains(&(s.id, t.id)) {
                continue;
            }
            if reaches(&g.connections, t.id, s.id) {
                continue;
            }
            out.push((s.id, t.id));
        }
    }
    out
}

/// Indices of enabled connections whose split node is not already present.
fn split_sites(g: &Genome, registry: &InnovationRegistry) -> Vec<usize> {
    g.connections
        .iter()
        .enumerate()
        .filter(|(_, c)| c.enabled)
        .filter(|(_, c)| {
            registry
                .peek_split(c.source, c.target)
                .is_none_or(|id| g.node(id).is_none())
        })
        .map(|(i, _)| i)
        .collect()
}

fn with_connection(g: &Genome, gene: ConnectionGene) -> Genome {
    let mut connections = g.connections.clone();
    let at = connections.partition_point(|c| c.innovation < gene.innovation);
    connections.insert(at, gene);
    Genome::from_sorted(g.nodes.clone(), connections)
}

/// Standard NEAT node insertion: the old gene is disabled, the incoming
/// half gets weight 1 and the outgoing half inherits the old weight.
fn split_connection(
    g: &Genome,
    index: usize,
    activation: Activation,
    registry: &mut InnovationRegistry,
) -> Genome {
    let old = g.connections[index];
    let node = registry.split_node(old.source, old.target);
    let mut nodes = g.nodes.clone();
    let at = nodes.partition_point(|n| n.id < node);
    nodes.insert(
        at,
        NodeGene {
            id: node,
            activation,
            kind: NodeKind::Hidden,
        },
    );
    let mut connections = g.connections.clone();
    connections[index].enabled = false;
    connections.push(ConnectionGene {
        source: old.source,
        target: node,
        weight: 1.0,
        enabled: true,
        innovation: registry.connection(old.source, node),
    });
    connections.push(ConnectionGene {
        source: node,
        target: old.target,
        weight: old.weight,
        enabled: true,
        innovation: registry.connection(node, old.target),
    });
    connections.sort_by_key(|c| c.innovation);
    Genome::from_sorted(nodes, connections)
}

/// Innovation-aligned crossover. Matching genes come from either parent
/// with equal odds; disjoint and excess genes come from the fitter parent
/// (`a` on ties). Genes that would close a cycle in the child are dropped.
pub fn crossover<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    fitness_a: f64,
    fitness_b: f64,
    rng: &mut R,
) -> Genome {
    let a_fitter = fitness_a >= fitness_b;
    let mut aligned: BTreeMap<u64, (Option<&ConnectionGene>, Option<&ConnectionGene>)> =
        BTreeMap::new();
    for c in &a.connections {
        aligned.entry(c.innovation).or_default().0 = Some(c);
    }
    for c in &b.connections {
        aligned.entry(c.innovation).or_default().1 = Some(c);
    }

    let mut child: Vec<ConnectionGene> = Vec::new();
    for (_, pair) in aligned {
        let gene = match pair {
            (Some(ga), Some(gb)) => {
                let mut gene = if rng.random_bool(0.5) { *ga } else { *gb };
                if ga.enabled != gb.enabled {
                    gene.enabled = !rng.random_bool(INHERIT_DISABLED_PROB);
                }
                gene
            }
            (Some(ga), None) if a_fitter => *ga,
            (None, Some(gb)) if !a_fitter => *gb,
            _ => continue,
        };
        if gene.enabled && reaches(&child, gene.target, gene.source) {
            continue;
        }
        if child
            .iter()
            .any(|c| c.source == gene.source && c.target == gene.target)
        {
            // Same pair under two innovation numbers cannot arise from one
            // registry; keep the first.
            continue;
        }
        child.push(gene);
    }

    let (fit, other) = if a_fitter { (a, b) } else { (b, a) };
    let mut ids: BTreeSet<NodeId> = INPUT_IDS.iter().copied().collect();
    ids.insert(OUTPUT_ID);
    for c in &child {
        ids.insert(c.source);
        ids.insert(c.target);
    }
    let nodes = ids
        .into_iter()
        .map(|id| {
            *fit.node(id)
                .or_else(|| other.node(id))
                .expect("child references only parental nodes")
        })
        .collect();
    Genome::from_sorted(nodes, child)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReproductionTrace {
    pub crossed_over: bool,
    pub mutation: MutationTrace,
}

pub fn reproduce<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    fitness_a: f64,
    fitness_b: f64,
    rng: &mut R,
    rates: &VariationRates,
    registry: &mut InnovationRegistry,
) -> Genome {
    reproduce_traced(a, b, fitness_a, fitness_b, rng, rates, registry).0
}

/// Crossover at `crossover_prob`, otherwise a clone of `a`; then mutation.
pub fn reproduce_traced<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    fitness_a: f64,
    fitness_b: f64,
    rng: &mut R,
    rates: &VariationRates,
    registry: &mut InnovationRegistry,
) -> (Genome, ReproductionTrace) {
    let crossed_over = rng.random_bool(rates.crossover_prob);
    let base = if crossed_over {
        crossover(a, b, fitness_a, fitness_b, rng)
    } else {
        a.clone()
    };
    let (child, mutation) = mutate_traced(&base, rng, rates, registry);
    (
        child,
        ReproductionTrace {
            crossed_over,
            mutation,
        },
    )
}
