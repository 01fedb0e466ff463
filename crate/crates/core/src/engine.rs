//! The generational loop: evaluation, shared-world mating window, pairing,
//! offspring, energy and zone bookkeeping, death, termination.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{build_substrate, SubstrateConfig, SubstrateNetwork};
use crate::genome::{init_genome, reproduce, Genome, InnovationRegistry, VariationRates};
use crate::locomotion::{
    evaluate_network, run_mating_sim, FitnessConfig, KinematicsConfig, MatingAgent,
    MatingSimResult,
};
use crate::rng::{run_rng, RunRng};
use crate::selection::{
    apply_death, pair_in_zones, pair_proximity, pair_random, relocate_zones, update_energy,
    zone_occupancy, BiasMode, DeathMechanism, DeathSelectionConfig, Individual, Pair,
    ParentSelectionConfig, ParentStrategy,
};
use crate::world::{
    local_densities, periodic_displacement, periodic_distance, place_zones, DensityKernel,
    MatingZone, Position, Vec2, WorldConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub generations: u32,
    pub initial_population: usize,
    pub min_population: usize,
    pub max_population: usize,
    pub spawn_radius: f64,
    pub incubation_generations: u32,
    pub offspring_per_pair: usize,
    pub tournament_size: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            generations: 100,
            initial_population: 30,
            min_population: 1,
            max_population: 100,
            spawn_radius: 3.0,
            incubation_generations: 0,
            offspring_per_pair: 1,
            tournament_size: 3,
        }
    }
}

/// Everything a single run needs besides its seed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelConfig {
    pub world: WorldConfig,
    pub substrate: SubstrateConfig,
    pub kinematics: KinematicsConfig,
    pub fitness: FitnessConfig,
    pub variation: VariationRates,
    pub parent_selection: ParentSelectionConfig,
    pub death: DeathSelectionConfig,
    pub engine: EngineConfig,
}

impl ModelConfig {
    /// Zones exist when pairing or movement bias refers to them.
    pub fn zones_active(&self) -> bool {
        let ps = &self.parent_selection;
        ps.zone_count > 0
            && (ps.strategy == ParentStrategy::Zones
                || matches!(ps.bias, BiasMode::NearestZone | BiasMode::AssignedZone))
    }

    pub fn energy_active(&self) -> bool {
        self.death.mechanism == DeathMechanism::Energy
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Completed,
    Extinct,
    Exploded,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Completed => "completed",
            Status::Extinct => "extinct",
            Status::Exploded => "exploded",
        }
    }
}

/// Extinction and explosion take precedence over completion.
pub fn check_termination(population: usize, generation: u32, cfg: &EngineConfig) -> Status {
    if population < cfg.min_population {
        Status::Extinct
    } else if population >= cfg.max_population {
        Status::Exploded
    } else if generation >= cfg.generations {
        Status::Completed
    } else {
        Status::Running
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitnessStats {
    pub best: f64,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

impl FitnessStats {
    /// Population standard deviation. `None` for an empty sample.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 {
            0.5 * (sorted[mid - 1] + sorted[mid])
        } else {
            sorted[mid]
        };
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            best: sorted[sorted.len() - 1],
            mean,
            median,
            std: var.sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u32,
    /// Size after death selection.
    pub population: usize,
    pub births: usize,
    pub deaths: usize,
    /// Over the individuals alive at the start of the generation.
    pub fitness: Option<FitnessStats>,
    pub matings: usize,
    pub mean_pair_distance: Option<f64>,
    /// Mean pairwise periodic distance of the survivors.
    pub dispersion: Option<f64>,
    pub mean_energy: Option<f64>,
    /// Occupants per zone at pairing time; empty when zones are inactive.
    pub zone_occupancy: Vec<usize>,
}

/// What [`Simulation::step`] exposes for logging beyond the record.
#[derive(Clone, Debug)]
pub struct GenerationReport {
    pub record: GenerationRecord,
    pub pairs: Vec<Pair>,
    /// Ids in the order of `mating.trajectories`.
    pub agent_ids: Vec<u64>,
    pub agent_fitness: Vec<f64>,
    pub mating: MatingSimResult,
    /// Zones as they stood during pairing, before relocation.
    pub zones: Vec<MatingZone>,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: Status,
    pub final_generation: u32,
    pub final_population: usize,
    pub best_fitness: Option<f64>,
    pub records: Vec<GenerationRecord>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn dispersion(positions: &[Position], world: &WorldConfig) -> Option<f64> {
    let mut pairs = Vec::new();
    for (i, &a) in positions.iter().enumerate() {
        for &b in &positions[i + 1..] {
            pairs.push(periodic_distance(a, b, world));
        }
    }
    mean(pairs.into_iter())
}

/// Uniform point in the periodic disc of `radius` around the parents'
/// minimum-image midpoint.
pub fn spawn_position<R: Rng + ?Sized>(
    a: Position,
    b: Position,
    radius: f64,
    rng: &mut R,
    world: &WorldConfig,
) -> Position {
    let mid = a.offset(periodic_displacement(a, b, world).scale(0.5), world);
    let r = radius * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..TAU);
    mid.offset(Vec2::new(r * theta.cos(), r * theta.sin()), world)
}

fn evaluate_batch(
    genomes: &[&Genome],
    cfg: &ModelConfig,
) -> Vec<(SubstrateNetwork, f64)> {
    genomes
        .par_iter()
        .map(|g| {
            let net = build_substrate(g, &cfg.substrate);
            let f = evaluate_network(&net, &cfg.fitness, &cfg.kinematics, &cfg.substrate, &cfg.world)
                .fitness;
            (net, f)
        })
        .collect()
}

fn tournament<'a, R: Rng + ?Sized>(
    pool: &'a [(Genome, f64)],
    k: usize,
    rng: &mut R,
) -> &'a (Genome, f64) {
    let mut best = &pool[rng.random_range(0..pool.len())];
    for _ in 1..k.max(1) {
        let c = &pool[rng.random_range(0..pool.len())];
        if c.1 > best.1 {
            best = c;
        }
    }
    best
}

/// Panmictic warm-up. Returns the genomes of the final generation with
/// their fitness, and the best fitness seen after each generation.
pub fn run_incubation<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    rng: &mut R,
    registry: &mut InnovationRegistry,
) -> (Vec<(Genome, f64)>, Vec<f64>) {
    let n = cfg.engine.initial_population;
    let genomes: Vec<Genome> = (0..n)
        .map(|_| init_genome(rng, &cfg.variation, registry))
        .collect();
    let fits = evaluate_batch(&genomes.iter().collect::<Vec<_>>(), cfg);
    let mut pool: Vec<(Genome, f64)> =
        genomes.into_iter().zip(fits).map(|(g, (_, f))| (g, f)).collect();
    let mut history = Vec::new();
    for _ in 0..cfg.engine.incubation_generations {
        if pool.is_empty() {
            break;
        }
        let elite = pool
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
            .map(|(_, e)| e.clone())
            .expect("nonempty pool");
        let mut children = Vec::with_capacity(n.saturating_sub(1));
        for _ in 1..n {
            let a = tournament(&pool, cfg.engine.tournament_size, rng);
            let b = tournament(&pool, cfg.engine.tournament_size, rng);
            children.push(reproduce(&a.0, &b.0, a.1, b.1, rng, &cfg.variation, registry));
        }
        let fits = evaluate_batch(&children.iter().collect::<Vec<_>>(), cfg);
        pool = std::iter::once(elite)
            .chain(children.into_iter().zip(fits).map(|(g, (_, f))| (g, f)))
            .collect();
        history.push(pool.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max));
    }
    (pool, history)
}

/// One run's mutable state. Owns the rng so every stochastic decision is
/// reproducible from the seed.
pub struct Simulation {
    cfg: ModelConfig,
    rng: RunRng,
    registry: InnovationRegistry,
    population: Vec<Individual>,
    networks: BTreeMap<u64, SubstrateNetwork>,
    zones: Vec<MatingZone>,
    next_id: u64,
    generation: u32,
    best_ever: Option<f64>,
    status: Status,
    incubation_history: Vec<f64>,
}

impl Simulation {
    pub fn new(cfg: ModelConfig, seed: u64) -> Self {
        let mut rng = run_rng(seed);
        let mut registry = InnovationRegistry::new();
        let (pool, incubation_history) = run_incubation(&cfg, &mut rng, &mut registry);
        let zones = if cfg.zones_active() {
            place_zones(
                cfg.parent_selection.zone_count,
                cfg.parent_selection.zone_radius,
                &mut rng,
                &cfg.world,
            )
        } else {
            Vec::new()
        };
        let mut sim = Self {
            cfg,
            rng,
            registry,
            population: Vec::new(),
            networks: BTreeMap::new(),
            zones,
            next_id: 0,
            generation: 0,
            best_ever: None,
            status: Status::Running,
            incubation_history,
        };
        let genomes: Vec<Genome> = pool.into_iter().map(|(g, _)| g).collect();
        let placed: Vec<(Genome, Position)> = genomes
            .into_iter()
            .map(|g| {
                let p = sim.cfg.world.sample_position(&mut sim.rng);
                (g, p)
            })
            .collect();
        let born = sim.spawn(placed);
        sim.population = born;
        sim.status = check_termination(sim.population.len(), 0, &sim.cfg.engine);
        sim
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    pub fn zones(&self) -> &[MatingZone] {
        &self.zones
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn best_fitness(&self) -> Option<f64> {
        self.best_ever
    }

    pub fn incubation_history(&self) -> &[f64] {
        &self.incubation_history
    }

    /// Creates individuals with fresh ids, evaluated in parallel and merged
    /// in id order.
    fn spawn(&mut self, placed: Vec<(Genome, Position)>) -> Vec<Individual> {
        let evaluated = evaluate_batch(&placed.iter().map(|p| &p.0).collect::<Vec<_>>(), &self.cfg);
        let zone_count = self.zones.len();
        let mut out = Vec::with_capacity(placed.len());
        for ((genome, position), (net, fitness)) in placed.into_iter().zip(evaluated) {
            let id = self.next_id;
            self.next_id += 1;
            let heading = self.rng.random_range(0.0..TAU);
            self.networks.insert(id, net);
            self.best_ever = Some(self.best_ever.map_or(fitness, |b: f64| b.max(fitness)));
            out.push(Individual {
                id,
                genome,
                position,
                heading,
                fitness,
                age: 0,
                energy: self.cfg.death.initial_energy,
                assigned_zone: (zone_count > 0).then(|| (id % zone_count as u64) as usize),
            });
        }
        out
    }

    /// Advances one generation. Panics if the run has already terminated.
    pub fn step(&mut self) -> GenerationReport {
        assert_eq!(self.status, Status::Running, "step on a terminated run");
        self.generation += 1;
        let generation = self.generation;
        let cfg = self.cfg.clone();
        let world = &cfg.world;

        // (1) Fitness: every individual was evaluated when it was spawned.
        let fitness = FitnessStats::from_values(
            &self.population.iter().map(|i| i.fitness).collect::<Vec<_>>(),
        );

        // (2) Shared-world mating window.
        let mating = {
            let agents: Vec<MatingAgent<'_>> = self
                .population
                .iter()
                .map(|i| MatingAgent {
                    position: i.position,
                    heading: i.heading,
                    assigned_zone: i.assigned_zone,
                    network: &self.networks[&i.id],
                })
                .collect();
            run_mating_sim(
                &agents,
                &self.zones,
                cfg.parent_selection.bias,
                &cfg.kinematics,
                &cfg.substrate,
                world,
            )
        };
        for (ind, (&p, &h)) in self
            .population
            .iter_mut()
            .zip(mating.final_positions.iter().zip(&mating.final_headings))
        {
            ind.position = p;
            ind.heading = h;
        }
        let agent_ids: Vec<u64> = self.population.iter().map(|i| i.id).collect();
        let agent_fitness: Vec<f64> = self.population.iter().map(|i| i.fitness).collect();

        // (3) Parent selection.
        let ps = &cfg.parent_selection;
        let (pairs, mated_zones) = match ps.strategy {
            ParentStrategy::Proximity => {
                (pair_proximity(&self.population, ps.pairing_radius, world), Vec::new())
            }
            ParentStrategy::Random => (pair_random(&self.population, &mut self.rng, world), Vec::new()),
            ParentStrategy::Zones => {
                pair_in_zones(&self.population, &self.zones, ps.pairing_radius, world)
            }
        };
        let positions: Vec<Position> = self.population.iter().map(|i| i.position).collect();
        let occupancy = zone_occupancy(&positions, &self.zones, world);

        // (4) Offspring.
        let index: BTreeMap<u64, usize> = agent_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
        let mut placed = Vec::new();
        for pair in &pairs {
            let a = &self.population[index[&pair.first]];
            let b = &self.population[index[&pair.second]];
            for _ in 0..cfg.engine.offspring_per_pair {
                let child = reproduce(
                    &a.genome,
                    &b.genome,
                    a.fitness,
                    b.fitness,
                    &mut self.rng,
                    &cfg.variation,
                    &mut self.registry,
                );
                let at = spawn_position(a.position, b.position, cfg.engine.spawn_radius, &mut self.rng, world);
                placed.push((child, at));
            }
        }
        let offspring = self.spawn(placed);
        let births = offspring.len();

        // (5) Energy, then zone relocation.
        let mated: BTreeSet<u64> = pairs.iter().flat_map(|p| [p.first, p.second]).collect();
        let mut elders = std::mem::take(&mut self.population);
        if cfg.energy_active() {
            elders = elders
                .into_iter()
                .map(|i| {
                    let m = mated.contains(&i.id);
                    update_energy(i, m, &cfg.death)
                })
                .collect();
        }
        let zones_during = self.zones.clone();
        if !self.zones.is_empty() {
            self.zones = relocate_zones(&self.zones, ps, &mated_zones, generation, &mut self.rng, world);
        }

        // (6) Death.
        let before = elders.len() + births;
        let survivors = match cfg.death.mechanism {
            DeathMechanism::Fitness | DeathMechanism::Age => {
                let mut merged = elders;
                merged.extend(offspring);
                let mut kept = apply_death(merged, &cfg.death, &pairs, &[], &mut self.rng);
                for i in kept.iter_mut().filter(|i| i.id < self.first_id_of(births)) {
                    i.age += 1;
                }
                kept
            }
            _ => {
                let densities = if cfg.death.mechanism == DeathMechanism::Density {
                    let all: Vec<Position> =
                        elders.iter().chain(&offspring).map(|i| i.position).collect();
                    let kernel = DensityKernel { sigma: cfg.death.density_sigma };
                    let mut rho = local_densities(&all, kernel, world);
                    rho.truncate(elders.len());
                    rho
                } else {
                    Vec::new()
                };
                let mut kept = apply_death(elders, &cfg.death, &pairs, &densities, &mut self.rng);
                for i in &mut kept {
                    i.age += 1;
                }
                kept.extend(offspring);
                kept
            }
        };
        let deaths = before - survivors.len();
        let alive: BTreeSet<u64> = survivors.iter().map(|i| i.id).collect();
        self.networks.retain(|id, _| alive.contains(id));
        self.population = survivors;

        let final_positions: Vec<Position> = self.population.iter().map(|i| i.position).collect();
        let record = GenerationRecord {
            generation,
            population: self.population.len(),
            births,
            deaths,
            fitness,
            matings: pairs.len(),
            mean_pair_distance: mean(pairs.iter().map(|p| p.distance)),
            dispersion: dispersion(&final_positions, world),
            mean_energy: if cfg.energy_active() {
                mean(self.population.iter().map(|i| i.energy))
            } else {
                None
            },
            zone_occupancy: occupancy,
        };
        self.status = check_termination(self.population.len(), generation, &cfg.engine);
        GenerationReport {
            record,
            pairs,
            agent_ids,
            agent_fitness,
            mating,
            zones: zones_during,
            status: self.status,
        }
    }

    /// Lowest id among the `births` most recently spawned individuals.
    fn first_id_of(&self, births: usize) -> u64 {
        self.next_id - births as u64
    }

    /// Steps to termination, handing each report to `observe`.
    pub fn run_with<F>(mut self, mut observe: F) -> RunOutcome
    where
        F: FnMut(&Simulation, &GenerationReport),
    {
        let mut records = Vec::new();
        while self.status == Status::Running {
            let report = self.step();
            observe(&self, &report);
            records.push(report.record);
        }
        RunOutcome {
            status: self.status,
            final_generation: self.generation,
            final_population: self.population.len(),
            best_fitness: self.best_ever,
            records,
        }
    }

    pub fn run(self) -> RunOutcome {
        self.run_with(|_, _| {})
    }
}
