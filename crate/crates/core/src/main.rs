use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use spatial_ea::harness::{
    analyze_dir, load_config_file, run_experiment, run_sweep, ExperimentConfig, SweepSpec,
};

#[derive(Parser)]
#[command(name = "spatial-ea", version, about = "Spatial evolutionary algorithm simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded experiment into <out>/base/<seed>/.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output root; defaults to $SPATIAL_EA_OUT, then experiment.output_dir.
        #[arg(long, env = "SPATIAL_EA_OUT")]
        out: Option<PathBuf>,
    },
    /// Replicated runs over a parameter grid.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        grid: PathBuf,
        /// Runs per cell; defaults to experiment.runs.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Base seed; defaults to experiment.base_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "SPATIAL_EA_OUT")]
        out: Option<PathBuf>,
    },
    /// Order parameter per value of --param, critical point, per-cell summary.
    Analyze {
        #[arg(long, env = "SPATIAL_EA_OUT")]
        out: PathBuf,
        #[arg(long, default_value = "parent_selection.zone_count")]
        param: String,
    },
    /// Check a config (and optionally a grid); exit status 0 if valid.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: Option<PathBuf>,
    },
}

fn config_or_default(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => Ok(load_config_file(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn load_grid(base: ExperimentConfig, path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    Ok(SweepSpec::parse(base, &text).with_context(|| format!("{}", path.display()))?)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let cfg = config_or_default(config.as_deref())?;
            let root = out.unwrap_or_else(|| PathBuf::from(&cfg.experiment.output_dir));
            let dir = root.join("base").join(seed.to_string());
            let line = run_experiment(&cfg, seed, Some(&dir), "base", 0, 0, &BTreeMap::new())?;
            println!("{}", serde_json::to_string(&line)?);
        }
        Command::Sweep { config, grid, runs, workers, seed, out } => {
            let cfg = config_or_default(config.as_deref())?;
            let root = out.unwrap_or_else(|| PathBuf::from(&cfg.experiment.output_dir));
            let runs = runs.unwrap_or(cfg.experiment.runs);
            let seed = seed.unwrap_or(cfg.experiment.base_seed);
            let spec = load_grid(cfg, &grid)?;
            let table = run_sweep(&spec, runs, seed, workers, Some(&root))?;
            println!("cell\textinct\texploded\tcompleted\tfailed\tphi");
            for c in &table.cells {
                let phi = c.summary.phi.map_or("-".to_string(), |p| format!("{p:.3}"));
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{phi}",
                    c.cell.label, c.counts.extinct, c.counts.exploded, c.counts.completed, c.counts.failed
                );
            }
        }
        Command::Analyze { out, param } => {
            let a = analyze_dir(&out, &param)?;
            println!("{param}\truns\textinct\texploded\tcompleted\tfailed\tphi");
            for r in &a.phi {
                let phi = r.phi.map_or("-".to_string(), |p| format!("{p:.3}"));
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{phi}",
                    r.value, r.runs, r.extinct, r.exploded, r.completed, r.failed
                );
            }
            match &a.critical_point {
                Ok(n) => println!("critical point: {n:.3}"),
                Err(e) => println!("critical point: {e}"),
            }
        }
        Command::Validate { config, grid } => {
            let checked = load_config_file(&config)
                .map_err(anyhow::Error::from)
                .and_then(|cfg| match grid {
                    Some(g) => load_grid(cfg, &g).map(|_| ()),
                    None => Ok(()),
                });
            return Ok(match checked {
                Ok(()) => {
                    println!("ok");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("invalid: {e:#}");
                    ExitCode::FAILURE
                }
            });
        }
    }
    Ok(ExitCode::SUCCESS)
}
