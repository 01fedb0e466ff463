//! Surrogate kinematics standing in for the rigid-body simulator.
//!
//! Joints track their targets under a rate limit. Mean absolute joint
//! excursion per tick drives forward speed, and the left/right imbalance of
//! joint motion steers, so heading is `psi0 + c_turn * (mean_left - mean_right)`
//! relative to the starting posture. Locomotion competence is therefore a
//! function of how the evolved controller coordinates its joints.

use serde::{Deserialize, Serialize};

use crate::controller::{
    assemble_inputs_into, build_substrate, SubstrateConfig, SubstrateNetwork, JOINT_LIMIT,
};
use crate::genome::Genome;
use crate::selection::{direction_input, BiasMode};
use crate::world::{MatingZone, Position, Vec2, WorldConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KinematicsConfig {
    /// Control timestep, seconds.
    pub dt: f64,
    /// Joint rate limit, rad/s.
    pub max_joint_rate: f64,
    /// Meters advanced per radian of mean joint excursion.
    pub forward_gain: f64,
    /// Heading change per radian of left/right excursion imbalance.
    pub turn_gain: f64,
    /// Isolated fitness evaluation window, seconds.
    pub eval_duration: f64,
    /// Shared-world mating window, seconds.
    pub mating_duration: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            max_joint_rate: 4.0,
            forward_gain: 0.05,
            turn_gain: 1.0,
            eval_duration: 60.0,
            mating_duration: 60.0,
        }
    }
}

impl KinematicsConfig {
    pub fn ticks(&self, duration: f64) -> usize {
        (duration / self.dt).round() as usize
    }

    /// Upper bound on the distance covered in one tick.
    pub fn max_step(&self) -> f64 {
        self.forward_gain * self.max_joint_rate * self.dt
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessMode {
    Simple,
    Directional,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitnessConfig {
    pub mode: FitnessMode,
    pub progress_weight: f64,
    pub target: Vec2,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            mode: FitnessMode::Simple,
            progress_weight: 0.5,
            target: Vec2::new(1.0, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub position: Position,
    pub heading: f64,
    pub joints: Vec<f64>,
    pub time: f64,
}

impl AgentState {
    pub fn at_rest(position: Position, heading: f64, joints: usize) -> Self {
        Self {
            position,
            heading,
            joints: vec![0.0; joints],
            time: 0.0,
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Advance one control tick in place and return the unwrapped displacement.
pub fn step_agent(
    state: &mut AgentState,
    targets: &[f64],
    cfg: &KinematicsConfig,
    world: &WorldConfig,
) -> Vec2 {
    debug_assert_eq!(targets.len(), state.joints.len());
    let max_delta = cfg.max_joint_rate * cfg.dt;
    let mut deltas = Vec::with_capacity(targets.len());
    for (theta, &target) in state.joints.iter_mut().zip(targets) {
        let target = target.clamp(-JOINT_LIMIT, JOINT_LIMIT);
        let d = (target - *theta).clamp(-max_delta, max_delta);
        *theta = (*theta + d).clamp(-JOINT_LIMIT, JOINT_LIMIT);
        deltas.push(d);
    }
    let half = deltas.len() / 2;
    let excursion = deltas.iter().map(|d| d.abs()).sum::<f64>() / deltas.len().max(1) as f64;
    let step = cfg.forward_gain * excursion;
    state.heading += cfg.turn_gain * (mean(&deltas[..half]) - mean(&deltas[half..]));
    let delta = Vec2::new(step * state.heading.cos(), step * state.heading.sin());
    state.position = state.position.offset(delta, world);
    state.time += cfg.dt;
    delta
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitnessReport {
    pub fitness: f64,
    /// `x_end - x_start` in unwrapped coordinates.
    pub net_displacement: Vec2,
    /// Sum of per-tick step lengths.
    pub path_length: f64,
}

pub fn score(fcfg: &FitnessConfig, net_displacement: Vec2, path_length: f64) -> f64 {
    match fcfg.mode {
        FitnessMode::Simple => net_displacement.norm(),
        FitnessMode::Directional => {
            let n = net_displacement.norm();
            let bonus = if n > 0.0 {
                (net_displacement.dot(fcfg.target) / n).max(0.0)
            } else {
                0.0
            };
            path_length * (1.0 + fcfg.progress_weight * bonus)
        }
    }
}

/// Isolated evaluation of an already-built controller: a lone agent from
/// the origin, heading 0, no directional input.
pub fn evaluate_network(
    net: &SubstrateNetwork,
    fcfg: &FitnessConfig,
    kcfg: &KinematicsConfig,
    scfg: &SubstrateConfig,
    world: &WorldConfig,
) -> FitnessReport {
    let origin = crate::world::wrap_position(Vec2::ZERO, world);
    let mut state = AgentState::at_rest(origin, 0.0, scfg.joints);
    let mut inputs = Vec::with_capacity(scfg.input_count());
    let mut net_displacement = Vec2::ZERO;
    let mut path_length = 0.0;
    for _ in 0..kcfg.ticks(kcfg.eval_duration) {
        assemble_inputs_into(&mut inputs, &state.joints, state.time, Vec2::ZERO, scfg);
        let targets = net.forward(&inputs);
        let d = step_agent(&mut state, &targets, kcfg, world);
        net_displacement = net_displacement + d;
        path_length += d.norm();
    }
    FitnessReport {
        fitness: score(fcfg, net_displacement, path_length),
        net_displacement,
        path_length,
    }
}

pub fn evaluate_fitness(
    genome: &Genome,
    fcfg: &FitnessConfig,
    kcfg: &KinematicsConfig,
    scfg: &SubstrateConfig,
    world: &WorldConfig,
) -> f64 {
    evaluate_network(&build_substrate(genome, scfg), fcfg, kcfg, scfg, world).fitness
}

/// One participant in the shared-world window.
#[derive(Clone, Copy, Debug)]
pub struct MatingAgent<'a> {
    pub position: Position,
    pub heading: f64,
    pub assigned_zone: Option<usize>,
    pub network: &'a SubstrateNetwork,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatingSimResult {
    /// Per agent, the position after every tick.
    pub trajectories: Vec<Vec<Position>>,
    pub final_positions: Vec<Position>,
    pub final_headings: Vec<f64>,
}

/// Lockstep simulation of all agents. Directional inputs at each tick are
/// computed from the previous tick's positions, so agent updates within a
/// tick are independent of iteration order.
pub fn run_mating_sim(
    agents: &[MatingAgent<'_>],
    zones: &[MatingZone],
    bias: BiasMode,
    kcfg: &KinematicsConfig,
    scfg: &SubstrateConfig,
    world: &WorldConfig,
) -> MatingSimResult {
    if agents.is_empty() {
        return MatingSimResult::default();
    }
    let ticks = kcfg.ticks(kcfg.mating_duration);
    let mut states: Vec<AgentState> = agents
        .iter()
        .map(|a| AgentState::at_rest(a.position, a.heading, scfg.joints))
        .collect();
    let mut trajectories: Vec<Vec<Position>> =
        (0..agents.len()).map(|_| Vec::with_capacity(ticks)).collect();
    let mut inputs = Vec::with_capacity(scfg.input_count());
    let mut positions: Vec<Position> = states.iter().map(|s| s.position).collect();

    for _ in 0..ticks {
        for (i, (state, agent)) in states.iter_mut().zip(agents).enumerate() {
            let dir = direction_input(i, &positions, agent.assigned_zone, zones, bias, world);
            assemble_inputs_into(&mut inputs, &state.joints, state.time, dir, scfg);
            let targets = agent.network.forward(&inputs);
            step_agent(state, &targets, kcfg, world);
            trajectories[i].push(state.position);
        }
        for (p, s) in positions.iter_mut().zip(&states) {
            *p = s.position;
        }
    }
    MatingSimResult {
        trajectories,
        final_positions: positions,
        final_headings: states.iter().map(|s| s.heading).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{init_genome, InnovationRegistry, VariationRates};
    use crate::world::{periodic_distance, wrap_position};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn world() -> WorldConfig {
        WorldConfig::default()
    }

    fn origin() -> Position {
        wrap_position(Vec2::ZERO, &world())
    }

    #[test]
    fn fixed_point_when_targets_match() {
        let cfg = KinematicsConfig::default();
        let mut s = AgentState::at_rest(origin(), 0.3, 8);
        s.joints = vec![0.2; 8];
        let d = step_agent(&mut s, &[0.2; 8], &cfg, &world());
        assert_eq!(d, Vec2::ZERO);
        assert_eq!(s.heading, 0.3);
        assert_eq!(s.position, origin());
    }

    #[test]
    fn symmetric_motion_goes_straight() {
        let cfg = KinematicsConfig::default();
        let mut s = AgentState::at_rest(origin(), 0.0, 8);
        let targets = [0.5, -0.5, 0.3, -0.3, 0.5, -0.5, 0.3, -0.3];
        step_agent(&mut s, &targets, &cfg, &world());
        assert_eq!(s.heading, 0.0);
        assert_eq!(s.position.y(), 0.0);
        assert!(s.position.x() > 0.0);
    }

    #[test]
    fn saturated_swing_moves_max_step() {
        let cfg = KinematicsConfig::default();
        let mut s = AgentState::at_rest(origin(), 0.0, 8);
        // Alternate full swings so every joint hits the rate limit each tick
        // while halves stay balanced.
        for k in 0..50 {
            let sign = if (k / 10) % 2 == 0 { 1.0 } else { -1.0 };
            let targets = [sign * JOINT_LIMIT; 8];
            let before = s.joints.clone();
            let d = step_agent(&mut s, &targets, &cfg, &world());
            let all_saturated = before
                .iter()
                .zip(&s.joints)
                .all(|(a, b)| ((b - a).abs() - cfg.max_joint_rate * cfg.dt).abs() < 1e-12);
            if all_saturated {
                let expected = cfg.forward_gain * cfg.max_joint_rate * cfg.dt;
                assert!((d.norm() - expected).abs() < 1e-15);
            }
            assert!(d.norm() <= cfg.max_step() + 1e-15);
        }
    }

    #[test]
    fn directional_score_formula() {
        let f = FitnessConfig { mode: FitnessMode::Directional, ..Default::default() };
        assert!((score(&f, Vec2::new(5.0, 0.0), 5.0) - 5.0 * 1.5).abs() < 1e-12);
        assert_eq!(score(&f, Vec2::new(0.0, 3.0), 4.0), 4.0);
        assert_eq!(score(&f, Vec2::new(-2.0, 0.0), 4.0), 4.0);
        assert_eq!(score(&f, Vec2::ZERO, 0.0), 0.0);
        let simple = FitnessConfig::default();
        assert_eq!(score(&simple, Vec2::new(3.0, 4.0), 9.0), 5.0);
    }

    #[test]
    fn zero_network_scores_zero() {
        let scfg = SubstrateConfig::default();
        let kcfg = KinematicsConfig { eval_duration: 5.0, ..Default::default() };
        let net = SubstrateNetwork::zeros(&scfg);
        for mode in [FitnessMode::Simple, FitnessMode::Directional] {
            let f = FitnessConfig { mode, ..Default::default() };
            assert_eq!(evaluate_network(&net, &f, &kcfg, &scfg, &world()).fitness, 0.0);
        }
    }

    #[test]
    fn fitness_bounds_hold_for_random_genomes() {
        let scfg = SubstrateConfig::default();
        let kcfg = KinematicsConfig { eval_duration: 10.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut reg = InnovationRegistry::new();
        let mut moving = 0;
        for _ in 0..40 {
            let g = init_genome(&mut rng, &VariationRates::default(), &mut reg);
            let net = build_substrate(&g, &scfg);
            let simple = evaluate_network(&net, &FitnessConfig::default(), &kcfg, &scfg, &world());
            let dir_cfg = FitnessConfig { mode: FitnessMode::Directional, ..Default::default() };
            let dir = evaluate_network(&net, &dir_cfg, &kcfg, &scfg, &world());
            assert!(simple.fitness >= 0.0);
            assert!(simple.fitness <= simple.path_length + 1e-9);
            assert!(dir.fitness >= dir.path_length);
            assert!(dir.fitness <= dir.path_length * 1.5 + 1e-12);
            assert!(simple.path_length <= kcfg.max_step() * kcfg.ticks(10.0) as f64 + 1e-9);
            if simple.fitness > 0.0 {
                moving += 1;
            }
        }
        assert!(moving > 0, "some random controllers should move");
    }

    #[test]
    fn lone_agent_matches_isolated_path() {
        let scfg = SubstrateConfig::default();
        let kcfg = KinematicsConfig { eval_duration: 8.0, mating_duration: 8.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mut reg = InnovationRegistry::new();
        let g = init_genome(&mut rng, &VariationRates::default(), &mut reg);
        let net = build_substrate(&g, &scfg);
        let report = evaluate_network(&net, &FitnessConfig::default(), &kcfg, &scfg, &world());
        let agent = MatingAgent { position: origin(), heading: 0.0, assigned_zone: None, network: &net };
        let sim = run_mating_sim(&[agent], &[], BiasMode::None, &kcfg, &scfg, &world());
        let end = wrap_position(report.net_displacement, &world());
        assert!(periodic_distance(sim.final_positions[0], end, &world()) < 1e-9);
    }

    #[test]
    fn mating_sim_records_every_tick_and_is_deterministic() {
        let scfg = SubstrateConfig::default();
        let kcfg = KinematicsConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut reg = InnovationRegistry::new();
        let nets: Vec<SubstrateNetwork> = (0..3)
            .map(|_| build_substrate(&init_genome(&mut rng, &VariationRates::default(), &mut reg), &scfg))
            .collect();
        let agents: Vec<MatingAgent> = nets
            .iter()
            .map(|n| MatingAgent {
                position: world().sample_position(&mut rng),
                heading: rng.random_range(0.0..std::f64::consts::TAU),
                assigned_zone: None,
                network: n,
            })
            .collect();
        let a = run_mating_sim(&agents, &[], BiasMode::NearestNeighbor, &kcfg, &scfg, &world());
        let b = run_mating_sim(&agents, &[], BiasMode::NearestNeighbor, &kcfg, &scfg, &world());
        assert!(a.trajectories.iter().all(|t| t.len() == 3000));
        assert_eq!(a, b);
        assert!(run_mating_sim(&[], &[], BiasMode::None, &kcfg, &scfg, &world())
            .trajectories
            .is_empty());
    }

    #[test]
    fn no_bias_sim_invariant_to_order() {
        let scfg = SubstrateConfig::default();
        let kcfg = KinematicsConfig { mating_duration: 4.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut reg = InnovationRegistry::new();
        let nets: Vec<SubstrateNetwork> = (0..4)
            .map(|_| build_substrate(&init_genome(&mut rng, &VariationRates::default(), &mut reg), &scfg))
            .collect();
        let agents: Vec<MatingAgent> = nets
            .iter()
            .map(|n| MatingAgent {
                position: world().sample_position(&mut rng),
                heading: 1.0,
                assigned_zone: None,
                network: n,
            })
            .collect();
        let fwd = run_mating_sim(&agents, &[], BiasMode::None, &kcfg, &scfg, &world());
        let rev_agents: Vec<MatingAgent> = agents.iter().rev().copied().collect();
        let rev = run_mating_sim(&rev_agents, &[], BiasMode::None, &kcfg, &scfg, &world());
        let mut rev_pos = rev.final_positions.clone();
        rev_pos.reverse();
        assert_eq!(fwd.final_positions, rev_pos);
    }
}
