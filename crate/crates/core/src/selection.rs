//! Parent selection (proximity, random, zone-restricted), movement bias,
//! mating-zone relocation, and the six death-selection mechanisms.
//!
//! Populations are slices of [`Individual`] kept in ascending id order.
//! Every rule that needs an iteration order or a tie-break uses that order.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::genome::Genome;
use crate::world::{
    periodic_displacement, periodic_distance, relocate_zone, zone_membership, MatingZone,
    Position, Vec2, WorldConfig,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub id: u64,
    pub genome: Genome,
    pub position: Position,
    pub heading: f64,
    pub fitness: f64,
    pub age: u32,
    pub energy: f64,
    pub assigned_zone: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParentStrategy {
    Proximity,
    Random,
    Zones,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relocation {
    Static,
    Interval,
    EventDriven,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasMode {
    NearestNeighbor,
    NearestZone,
    AssignedZone,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParentSelectionConfig {
    pub strategy: ParentStrategy,
    pub pairing_radius: f64,
    pub zone_count: usize,
    pub zone_radius: f64,
    pub relocation: Relocation,
    /// Generations between relocations under [`Relocation::Interval`].
    pub relocation_interval: u32,
    pub bias: BiasMode,
}

impl Default for ParentSelectionConfig {
    fn default() -> Self {
        Self {
            strategy: ParentStrategy::Zones,
            pairing_radius: 10.0,
            zone_count: 15,
            zone_radius: 2.0,
            relocation: Relocation::EventDriven,
            relocation_interval: 5,
            bias: BiasMode::AssignedZone,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeathMechanism {
    Fitness,
    Age,
    ProbabilisticAge,
    Energy,
    Density,
    ParentsDie,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeathSelectionConfig {
    pub mechanism: DeathMechanism,
    /// Survivor count for the truncation mechanisms.
    pub target_size: usize,
    pub max_age: u32,
    pub initial_energy: f64,
    pub energy_depletion: f64,
    /// Energy paid per mating; the applied delta is `-mating_cost`, so a
    /// negative cost is a reward.
    pub mating_cost: f64,
    pub critical_density: f64,
    pub base_death_prob: f64,
    pub max_death_prob: f64,
    /// Gaussian kernel width for local density, meters.
    pub density_sigma: f64,
}

impl Default for DeathSelectionConfig {
    fn default() -> Self {
        Self {
            mechanism: DeathMechanism::Energy,
            target_size: 30,
            max_age: 35,
            initial_energy: 100.0,
            energy_depletion: 5.0,
            mating_cost: 25.0,
            critical_density: 5.0,
            base_death_prob: 0.01,
            max_death_prob: 0.1,
            density_sigma: 3.0,
        }
    }
}

impl DeathSelectionConfig {
    pub fn mating_delta(&self) -> f64 {
        -self.mating_cost
    }
}

/// A mating pair by individual id. `first` is the individual whose turn
/// formed the pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair {
    pub first: u64,
    pub second: u64,
    pub distance: f64,
    pub zone: Option<usize>,
}

impl Pair {
    pub fn contains(&self, id: u64) -> bool {
        self.first == id || self.second == id
    }
}

fn id_order(pop: &[Individual]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by_key(|&i| pop[i].id);
    idx
}

/// Greedy nearest-available pairing over `members` (indices into `pop`,
/// already in ascending id order).
fn greedy_pairs(
    members: &[usize],
    pop: &[Individual],
    radius: f64,
    zone: Option<usize>,
    world: &WorldConfig,
) -> Vec<Pair> {
    let mut paired = vec![false; members.len()];
    let mut pairs = Vec::new();
    for a in 0..members.len() {
        if paired[a] {
            continue;
        }
        let pa = pop[members[a]].position;
        let mut best: Option<(usize, f64)> = None;
        for b in 0..members.len() {
            if b == a || paired[b] {
                continue;
            }
            let d = periodic_distance(pa, pop[members[b]].position, world);
            if d > radius {
                continue;
            }
            // Strict `<` keeps the lower id on exact ties.
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((b, d));
            }
        }
        if let Some((b, d)) = best {
            paired[a] = true;
            paired[b] = true;
            pairs.push(Pair {
                first: pop[members[a]].id,
                second: pop[members[b]].id,
                distance: d,
                zone,
            });
        }
    }
    pairs
}

/// Each unpaired individual, in ascending id, mates with its nearest
/// unpaired neighbor within `radius`.
pub fn pair_proximity(pop: &[Individual], radius: f64, world: &WorldConfig) -> Vec<Pair> {
    greedy_pairs(&id_order(pop), pop, radius, None, world)
}

/// Uniform shuffle, then consecutive elements pair up.
pub fn pair_random<R: Rng + ?Sized>(
    pop: &[Individual],
    rng: &mut R,
    world: &WorldConfig,
) -> Vec<Pair> {
    let mut idx = id_order(pop);
    idx.shuffle(rng);
    idx.chunks_exact(2)
        .map(|c| Pair {
            first: pop[c[0]].id,
            second: pop[c[1]].id,
            distance: periodic_distance(pop[c[0]].position, pop[c[1]].position, world),
            zone: None,
        })
        .collect()
}

/// Bucket by zone membership and run proximity pairing inside each bucket.
/// Also returns the sorted indices of zones that hosted a pairing.
pub fn pair_in_zones(
    pop: &[Individual],
    zones: &[MatingZone],
    radius: f64,
    world: &WorldConfig,
) -> (Vec<Pair>, Vec<usize>) {
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); zones.len()];
    for i in id_order(pop) {
        if let Some(k) = zone_membership(pop[i].position, zones, world) {
            buckets[k].push(i);
        }
    }
    let mut pairs = Vec::new();
    let mut mated = Vec::new();
    for (k, members) in buckets.iter().enumerate() {
        let found = greedy_pairs(members, pop, radius, Some(k), world);
        if !found.is_empty() {
            mated.push(k);
        }
        pairs.extend(found);
    }
    (pairs, mated)
}

/// Count of individuals assigned to each zone by [`zone_membership`].
pub fn zone_occupancy(positions: &[Position], zones: &[MatingZone], world: &WorldConfig) -> Vec<usize> {
    let mut counts = vec![0; zones.len()];
    for &p in positions {
        if let Some(k) = zone_membership(p, zones, world) {
            counts[k] += 1;
        }
    }
    counts
}

fn unit_toward(from: Position, to: Position, world: &WorldConfig) -> Vec2 {
    periodic_displacement(from, to, world).normalized_or_zero()
}

/// Directional controller input for agent `index` given everyone's current
/// positions. Zero when the mode is `None`, when no target exists, or when
/// the agent already sits on its target.
pub fn direction_input(
    index: usize,
    positions: &[Position],
    assigned_zone: Option<usize>,
    zones: &[MatingZone],
    mode: BiasMode,
    world: &WorldConfig,
) -> Vec2 {
    let here = positions[index];
    match mode {
        BiasMode::None => Vec2::ZERO,
        BiasMode::NearestNeighbor => positions
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != index)
            .map(|(_, &p)| (p, periodic_distance(here, p, world)))
            .fold(None, |best: Option<(Position, f64)>, (p, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((p, d)),
            })
            .map_or(Vec2::ZERO, |(p, _)| unit_toward(here, p, world)),
        BiasMode::NearestZone => zones
            .iter()
            .map(|z| (z.center, periodic_distance(here, z.center, world)))
            .fold(None, |best: Option<(Position, f64)>, (c, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((c, d)),
            })
            .map_or(Vec2::ZERO, |(c, _)| unit_toward(here, c, world)),
        BiasMode::AssignedZone => assigned_zone
            .and_then(|k| zones.get(k))
            .map_or(Vec2::ZERO, |z| unit_toward(here, z.center, world)),
    }
}

pub fn movement_bias(
    individual: &Individual,
    pop: &[Individual],
    zones: &[MatingZone],
    mode: BiasMode,
    world: &WorldConfig,
) -> Vec2 {
    let positions: Vec<Position> = pop.iter().map(|i| i.position).collect();
    match pop.iter().position(|i| i.id == individual.id) {
        Some(index) => direction_input(index, &positions, individual.assigned_zone, zones, mode, world),
        None => {
            let mut with_self = positions;
            with_self.push(individual.position);
            let index = with_self.len() - 1;
            direction_input(index, &with_self, individual.assigned_zone, zones, mode, world)
        }
    }
}

/// Apply the configured relocation policy after a generation's pairing.
pub fn relocate_zones<R: Rng + ?Sized>(
    zones: &[MatingZone],
    cfg: &ParentSelectionConfig,
    mated: &[usize],
    generation: u32,
    rng: &mut R,
    world: &WorldConfig,
) -> Vec<MatingZone> {
    let mut out = zones.to_vec();
    match cfg.relocation {
        Relocation::Static => {}
        Relocation::Interval => {
            if generation % cfg.relocation_interval.max(1) == 0 {
                for z in &mut out {
                    *z = relocate_zone(z, rng, world);
                }
            }
        }
        Relocation::EventDriven => {
            let mut ks = mated.to_vec();
            ks.sort_unstable();
            ks.dedup();
            for k in ks {
                if let Some(z) = out.get_mut(k) {
                    *z = relocate_zone(z, rng, world);
                }
            }
        }
    }
    out
}

/// `P_base + P_max * (1 - exp(-rho / rho_c))`.
pub fn density_death_probability(rho: f64, cfg: &DeathSelectionConfig) -> f64 {
    cfg.base_death_prob + cfg.max_death_prob * (1.0 - (-rho / cfg.critical_density).exp())
}

pub fn age_death_probability(age: u32, max_age: u32) -> f64 {
    (age as f64 / max_age as f64).min(1.0)
}

/// `E' = E - depletion + (mated ? -cost : 0)`.
pub fn update_energy(mut individual: Individual, mated: bool, cfg: &DeathSelectionConfig) -> Individual {
    individual.energy -= cfg.energy_depletion;
    if mated {
        individual.energy += cfg.mating_delta();
    }
    individual
}

/// Survivors of death selection, in input order.
///
/// `densities` is indexed like `pop` and only read by the density
/// mechanism. Probabilistic mechanisms draw one uniform per individual in
/// ascending id order.
pub fn apply_death<R: Rng + ?Sized>(
    pop: Vec<Individual>,
    cfg: &DeathSelectionConfig,
    parents: &[Pair],
    densities: &[f64],
    rng: &mut R,
) -> Vec<Individual> {
    let n = pop.len();
    let mut keep = vec![true; n];
    match cfg.mechanism {
        DeathMechanism::Fitness => {
            let mut ranked = id_order(&pop);
            ranked.sort_by(|&a, &b| {
                pop[b]
                    .fitness
                    .total_cmp(&pop[a].fitness)
                    .then(pop[a].id.cmp(&pop[b].id))
            });
            for &i in ranked.iter().skip(cfg.target_size) {
                keep[i] = false;
            }
        }
        DeathMechanism::Age => {
            let mut ranked = id_order(&pop);
            ranked.sort_by_key(|&i| (pop[i].age, pop[i].id));
            for &i in ranked.iter().skip(cfg.target_size) {
                keep[i] = false;
            }
        }
        DeathMechanism::ProbabilisticAge => {
            for i in id_order(&pop) {
                let u: f64 = rng.random();
                if u < age_death_probability(pop[i].age, cfg.max_age) {
                    keep[i] = false;
                }
            }
        }
        DeathMechanism::Energy => {
            for (k, ind) in keep.iter_mut().zip(&pop) {
                *k = ind.energy > 0.0;
            }
        }
        DeathMechanism::Density => {
            assert_eq!(densities.len(), n, "one density per individual");
            for i in id_order(&pop) {
                let u: f64 = rng.random();
                if u < density_death_probability(densities[i], cfg) {
                    keep[i] = false;
                }
            }
        }
        DeathMechanism::ParentsDie => {
            for (k, ind) in keep.iter_mut().zip(&pop) {
                *k = !parents.iter().any(|p| p.contains(ind.id));
            }
        }
    }
    pop.into_iter()
        .zip(keep)
        .filter_map(|(ind, k)| k.then_some(ind))
        .collect()
}
