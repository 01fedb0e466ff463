use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::{summarize, write_summary, OutcomeCounts, SummaryRow};
use super::config::{ConfigError, ExperimentConfig};
use super::logs::{ensure_dir, write_outcomes, OutcomeLine, RunStatus};
use super::{run_experiment, HarnessError};
use crate::rng::cell_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted config path such as `parent_selection.zone_count`.
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, rename = "axis")]
    pub axes: Vec<Axis>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub axes: Vec<Axis>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    /// `path=value` pairs joined by `,`; `base` for an empty grid.
    pub label: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub config: ExperimentConfig,
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut node = root;
    let mut keys = path.split('.').peekable();
    while let Some(key) = keys.next() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| ConfigError::invalid(path, "not a config field"))?;
        let slot = table
            .get_mut(key)
            .ok_or_else(|| ConfigError::invalid(path, "not a config field"))?;
        if keys.peek().is_none() {
            if slot.is_table() {
                return Err(ConfigError::invalid(path, "names a section, not a field"));
            }
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    Err(ConfigError::invalid(path, "empty path"))
}

fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl SweepSpec {
    pub fn parse(base: ExperimentConfig, grid_text: &str) -> Result<Self, ConfigError> {
        let grid: Grid = toml::from_str(grid_text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let spec = Self { base, axes: grid.axes };
        spec.cells()?;
        Ok(spec)
    }

    /// Cross product of the axes, first axis outermost. Every cell config
    /// is validated.
    pub fn cells(&self) -> Result<Vec<Cell>, ConfigError> {
        for a in &self.axes {
            if a.values.is_empty() {
                return Err(ConfigError::invalid(&a.path, "axis has no values"));
            }
        }
        let base = toml::Value::try_from(&self.base).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let total: usize = self.axes.iter().map(|a| a.values.len()).product();
        let mut cells = Vec::with_capacity(total);
        for index in 0..total {
            let mut rem = index;
            let mut picks = vec![0; self.axes.len()];
            for (k, a) in self.axes.iter().enumerate().rev() {
                picks[k] = rem % a.values.len();
                rem /= a.values.len();
            }
            let mut doc = base.clone();
            let mut labels = Vec::new();
            let mut params = BTreeMap::new();
            for (a, &p) in self.axes.iter().zip(&picks) {
                let v = a.values[p].clone();
                labels.push(format!("{}={}", a.path, value_label(&v)));
                params.insert(
                    a.path.clone(),
                    serde_json::to_value(&v).map_err(|e| ConfigError::Parse(e.to_string()))?,
                );
                set_path(&mut doc, &a.path, v)?;
            }
            let config: ExperimentConfig = doc.try_into().map_err(|e: toml::de::Error| {
                ConfigError::Parse(format!("cell {index}: {}", e.message()))
            })?;
            config.validate()?;
            cells.push(Cell {
                index,
                label: if labels.is_empty() { "base".into() } else { labels.join(",") },
                params,
                config,
            });
        }
        Ok(cells)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellOutcomes {
    pub cell: Cell,
    pub runs: Vec<OutcomeLine>,
    pub counts: OutcomeCounts,
    pub summary: SummaryRow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeTable {
    pub cells: Vec<CellOutcomes>,
}

impl OutcomeTable {
    pub fn outcomes(&self) -> impl Iterator<Item = &OutcomeLine> {
        self.cells.iter().flat_map(|c| &c.runs)
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Executes `runs` replicates per cell on a pool of `workers` threads.
/// Results are folded in cell-then-run order, so the table does not depend
/// on scheduling. With `out` set, writes per-run logs plus
/// `outcomes.jsonl` and `table.csv` at the root.
pub fn run_sweep(
    spec: &SweepSpec,
    runs: usize,
    base_seed: u64,
    workers: usize,
    out: Option<&Path>,
) -> Result<OutcomeTable, HarnessError> {
    let cells = spec.cells()?;
    let jobs: Vec<(usize, usize, u64)> = cells
        .iter()
        .flat_map(|c| (0..runs).map(move |r| (c.index, r, cell_seed(base_seed, c.index as u64, r as u64))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let results: Vec<OutcomeLine> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ci, r, seed)| {
                let cell = &cells[ci];
                let dir = out.map(|o| o.join(&cell.label).join(seed.to_string()));
                let attempt = catch_unwind(AssertUnwindSafe(|| {
                    run_experiment(&cell.config, seed, dir.as_deref(), &cell.label, ci, r, &cell.params)
                }));
                let error = match attempt {
                    Ok(Ok(line)) => return line,
                    Ok(Err(e)) => e.to_string(),
                    Err(p) => panic_message(p),
                };
                OutcomeLine {
                    cell: cell.label.clone(),
                    cell_index: ci,
                    run: r,
                    seed,
                    params: cell.params.clone(),
                    status: RunStatus::Failed,
                    final_generation: 0,
                    final_population: 0,
                    best_fitness: None,
                    error: Some(error),
                }
            })
            .collect()
    });

    let mut grouped: Vec<Vec<OutcomeLine>> = vec![Vec::new(); cells.len()];
    for line in results {
        grouped[line.cell_index].push(line);
    }
    let table = OutcomeTable {
        cells: cells
            .into_iter()
            .zip(grouped)
            .map(|(cell, runs)| {
                let counts = OutcomeCounts::from_statuses(runs.iter().map(|r| &r.status));
                let summary = summarize(&cell.label, &runs.iter().collect::<Vec<_>>());
                CellOutcomes { cell, runs, counts, summary }
            })
            .collect(),
    };
    if let Some(o) = out {
        ensure_dir(o)?;
        write_outcomes(&o.join("outcomes.jsonl"), &table.outcomes().cloned().collect::<Vec<_>>())?;
        let rows: Vec<SummaryRow> = table.cells.iter().map(|c| c.summary.clone()).collect();
        write_summary(&o.join("table.csv"), &rows)?;
    }
    Ok(table)
}
