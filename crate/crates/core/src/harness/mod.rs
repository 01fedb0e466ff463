//! Configuration, replicated sweeps, logging and phase-transition analysis.

pub mod analysis;
pub mod config;
pub mod logs;
pub mod sweep;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use analysis::{
    analyze_dir, analyze_outcomes, estimate_critical_point, order_parameter, Analysis,
    AnalysisError, OutcomeCounts,
};
pub use config::{load_config, load_config_file, ConfigError, ExperimentConfig};
pub use logs::{OutcomeLine, RunStatus};
pub use sweep::{run_sweep, OutcomeTable, SweepSpec};

use crate::engine::Simulation;
use logs::RunLogger;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Runs one replicate to termination. With `dir` set, streams all logs
/// there as generations complete.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    seed: u64,
    dir: Option<&Path>,
    cell: &str,
    cell_index: usize,
    run: usize,
    params: &BTreeMap<String, serde_json::Value>,
) -> Result<OutcomeLine, HarnessError> {
    cfg.validate()?;
    let sim = Simulation::new(cfg.model(), seed);
    let mut logger = match dir {
        Some(d) => {
            let l = RunLogger::create(d, cfg.logging, sim.config().zones_active(), &cfg.to_toml())?;
            l.snapshot(0, sim.population())?;
            Some(l)
        }
        None => None,
    };
    let mut failure = None;
    let outcome = sim.run_with(|s, report| {
        if let (Some(l), None) = (logger.as_mut(), failure.as_ref()) {
            if let Err(e) = l.generation(report, s.population()) {
                failure = Some(e);
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let line = OutcomeLine {
        cell: cell.to_string(),
        cell_index,
        run,
        seed,
        params: params.clone(),
        status: outcome.status.into(),
        final_generation: outcome.final_generation,
        final_population: outcome.final_population,
        best_fitness: outcome.best_fitness,
        error: None,
    };
    if let Some(l) = logger {
        l.finish(&line)?;
    }
    Ok(line)
}
