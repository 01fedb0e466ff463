use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::SubstrateConfig;
use crate::engine::{EngineConfig, ModelConfig};
use crate::genome::VariationRates;
use crate::locomotion::{FitnessConfig, KinematicsConfig};
use crate::selection::{DeathSelectionConfig, ParentSelectionConfig};
use crate::world::WorldConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub(crate) fn invalid(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            path: path.to_string(),
            message: message.into(),
        }
    }

    /// Offending field path for validation errors.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { path, .. } => Some(path),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub runs: usize,
    pub base_seed: u64,
    pub output_dir: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            runs: 10,
            base_seed: 0,
            output_dir: "out".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoggingConfig {
    /// Write `trajectories/gen_<g>.csv` for every generation.
    pub trajectories: bool,
    /// Keep every n-th tick of the mating window (the last tick is always kept).
    pub trajectory_stride: usize,
    /// Write `genomes/gen_<g>.txt` snapshots.
    pub genomes: bool,
}

impl Default for LoggingConfig {
    fn default() -> Self {
        Self {
            trajectories: false,
            trajectory_stride: 10,
            genomes: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub substrate: SubstrateConfig,
    pub kinematics: KinematicsConfig,
    pub fitness: FitnessConfig,
    pub variation: VariationRates,
    pub parent_selection: ParentSelectionConfig,
    pub death: DeathSelectionConfig,
    pub engine: EngineConfig,
    pub experiment: ExperimentSection,
    pub logging: LoggingConfig,
}

struct Checker(Vec<ConfigError>);

impl Checker {
    fn check(&mut self, ok: bool, path: &str, message: &str) {
        if !ok {
            self.0.push(ConfigError::invalid(path, message));
        }
    }

    fn positive(&mut self, v: f64, path: &str) {
        self.check(v.is_finite() && v > 0.0, path, "must be a positive finite number");
    }

    fn non_negative(&mut self, v: f64, path: &str) {
        self.check(v.is_finite() && v >= 0.0, path, "must be a non-negative finite number");
    }

    fn probability(&mut self, v: f64, path: &str) {
        self.check((0.0..=1.0).contains(&v), path, "must lie in [0, 1]");
    }
}

impl ExperimentConfig {
    /// First violated constraint, in declaration order.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut c = Checker(Vec::new());
        c.positive(self.world.width, "world.width");
        c.positive(self.world.height, "world.height");

        c.check(self.substrate.joints > 0, "substrate.joints", "must be at least 1");
        c.non_negative(self.substrate.prune_threshold, "substrate.prune_threshold");
        c.positive(self.substrate.cpg_frequency, "substrate.cpg_frequency");

        let k = &self.kinematics;
        c.positive(k.dt, "kinematics.dt");
        c.positive(k.max_joint_rate, "kinematics.max_joint_rate");
        c.non_negative(k.forward_gain, "kinematics.forward_gain");
        c.check(k.turn_gain.is_finite(), "kinematics.turn_gain", "must be finite");
        c.non_negative(k.eval_duration, "kinematics.eval_duration");
        c.non_negative(k.mating_duration, "kinematics.mating_duration");

        c.non_negative(self.fitness.progress_weight, "fitness.progress_weight");
        let t = self.fitness.target;
        c.check(
            t.x.is_finite() && t.y.is_finite() && (t.norm() - 1.0).abs() < 1e-9,
            "fitness.target",
            "must be a unit vector",
        );

        let v = &self.variation;
        c.probability(v.weight_mutation_prob, "variation.weight_mutation_prob");
        c.probability(v.add_connection_prob, "variation.add_connection_prob");
        c.probability(v.add_node_prob, "variation.add_node_prob");
        c.probability(v.crossover_prob, "variation.crossover_prob");
        c.non_negative(v.mutation_sigma, "variation.mutation_sigma");
        c.non_negative(v.init_weight_sigma, "variation.init_weight_sigma");

        let p = &self.parent_selection;
        c.non_negative(p.pairing_radius, "parent_selection.pairing_radius");
        c.positive(p.zone_radius, "parent_selection.zone_radius");
        c.check(
            p.relocation_interval >= 1,
            "parent_selection.relocation_interval",
            "must be at least 1",
        );

        let d = &self.death;
        c.check(d.max_age >= 1, "death.max_age", "must be at least 1");
        c.check(d.initial_energy.is_finite(), "death.initial_energy", "must be finite");
        c.check(d.energy_depletion.is_finite(), "death.energy_depletion", "must be finite");
        c.check(d.mating_cost.is_finite(), "death.mating_cost", "must be finite");
        c.positive(d.critical_density, "death.critical_density");
        c.probability(d.base_death_prob, "death.base_death_prob");
        c.probability(d.max_death_prob, "death.max_death_prob");
        c.check(
            d.base_death_prob + d.max_death_prob <= 1.0,
            "death.max_death_prob",
            "base_death_prob + max_death_prob must not exceed 1",
        );
        c.positive(d.density_sigma, "death.density_sigma");

        let e = &self.engine;
        c.check(e.generations >= 1, "engine.generations", "must be at least 1");
        c.check(e.initial_population >= 1, "engine.initial_population", "must be at least 1");
        c.check(
            e.max_population > e.initial_population,
            "engine.max_population",
            "must exceed engine.initial_population",
        );
        c.check(
            e.min_population <= e.initial_population,
            "engine.min_population",
            "must not exceed engine.initial_population",
        );
        c.positive(e.spawn_radius, "engine.spawn_radius");
        c.check(e.offspring_per_pair >= 1, "engine.offspring_per_pair", "must be at least 1");
        c.check(e.tournament_size >= 1, "engine.tournament_size", "must be at least 1");

        c.check(self.experiment.runs >= 1, "experiment.runs", "must be at least 1");
        c.check(
            i64::try_from(self.experiment.base_seed).is_ok(),
            "experiment.base_seed",
            "must fit in a signed 64-bit integer",
        );
        c.check(
            self.logging.trajectory_stride >= 1,
            "logging.trajectory_stride",
            "must be at least 1",
        );
        match c.0.into_iter().next() {
            Some(err) => Err(err),
            None => Ok(()),
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            world: self.world,
            substrate: self.substrate,
            kinematics: self.kinematics,
            fitness: self.fitness,
            variation: self.variation,
            parent_selection: self.parent_selection,
            death: self.death,
            engine: self.engine,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parse and validate a TOML document. Missing keys take their defaults.
pub fn load_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_config(&text)
}
