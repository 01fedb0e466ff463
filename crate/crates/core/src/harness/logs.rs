//! On-disk formats. Per-run directory:
//!
//! ```text
//! config.toml
//! generations.csv
//! matings.csv
//! zones.csv                 (zones active)
//! trajectories/gen_<g>.csv  (logging.trajectories)
//! genomes/gen_<g>.txt       (logging.genomes; gen_0 is the initial population)
//! outcome.jsonl
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::LoggingConfig;
use super::HarnessError;
use crate::engine::{GenerationRecord, GenerationReport, Status};
use crate::genome::{parse_genome, Genome};
use crate::selection::Individual;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub generation: u32,
    pub population: usize,
    pub births: usize,
    pub deaths: usize,
    pub best_fitness: Option<f64>,
    pub mean_fitness: Option<f64>,
    pub median_fitness: Option<f64>,
    pub std_fitness: Option<f64>,
    pub matings: usize,
    pub mean_pair_distance: Option<f64>,
    pub dispersion: Option<f64>,
    pub mean_energy: Option<f64>,
    /// Per-zone counts joined with `;`.
    pub zone_occupancy: String,
}

impl From<&GenerationRecord> for GenerationRow {
    fn from(r: &GenerationRecord) -> Self {
        Self {
            generation: r.generation,
            population: r.population,
            births: r.births,
            deaths: r.deaths,
            best_fitness: r.fitness.map(|f| f.best),
            mean_fitness: r.fitness.map(|f| f.mean),
            median_fitness: r.fitness.map(|f| f.median),
            std_fitness: r.fitness.map(|f| f.std),
            matings: r.matings,
            mean_pair_distance: r.mean_pair_distance,
            dispersion: r.dispersion,
            mean_energy: r.mean_energy,
            zone_occupancy: r
                .zone_occupancy
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatingRow {
    pub generation: u32,
    pub parent_a: u64,
    pub parent_b: u64,
    pub distance: f64,
    /// Zone index, or -1 outside zone pairing.
    pub zone: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneRow {
    pub generation: u32,
    pub zone: usize,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub generation: u32,
    pub id: u64,
    /// 1-based tick within the mating window.
    pub tick: usize,
    pub x: f64,
    pub y: f64,
    pub fitness: f64,
}

/// Terminal status of a run as recorded on disk; `failed` marks runs that
/// errored or panicked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Extinct,
    Exploded,
    Failed,
}

impl From<Status> for RunStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Completed | Status::Running => RunStatus::Completed,
            Status::Extinct => RunStatus::Extinct,
            Status::Exploded => RunStatus::Exploded,
        }
    }
}

/// One line of `outcome.jsonl` / `outcomes.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeLine {
    pub cell: String,
    pub cell_index: usize,
    pub run: usize,
    pub seed: u64,
    /// Sweep axis values for this cell, keyed by config path.
    pub params: std::collections::BTreeMap<String, serde_json::Value>,
    pub status: RunStatus,
    pub final_generation: u32,
    pub final_population: usize,
    pub best_fitness: Option<f64>,
    pub error: Option<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub(crate) fn ensure_dir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(io_err(path))
}

struct CsvFile {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvFile {
    /// Header is written eagerly so an empty log still has one.
    fn create(path: PathBuf, header: &[&str]) -> Result<Self, HarnessError> {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(create(&path)?);
        writer.write_record(header).map_err(csv_err(&path))?;
        Ok(Self { path, writer })
    }

    fn row<T: Serialize>(&mut self, row: &T) -> Result<(), HarnessError> {
        self.writer.serialize(row).map_err(csv_err(&self.path))
    }

    fn finish(mut self) -> Result<(), HarnessError> {
        self.writer.flush().map_err(io_err(&self.path))
    }
}

const GENERATION_HEADER: &[&str] = &[
    "generation",
    "population",
    "births",
    "deaths",
    "best_fitness",
    "mean_fitness",
    "median_fitness",
    "std_fitness",
    "matings",
    "mean_pair_distance",
    "dispersion",
    "mean_energy",
    "zone_occupancy",
];
const MATING_HEADER: &[&str] = &["generation", "parent_a", "parent_b", "distance", "zone"];
const ZONE_HEADER: &[&str] = &["generation", "zone", "x", "y", "radius"];
const TRAJECTORY_HEADER: &[&str] = &["generation", "id", "tick", "x", "y", "fitness"];

/// Streams one run's logs to disk as generations complete.
pub struct RunLogger {
    dir: PathBuf,
    logging: LoggingConfig,
    generations: CsvFile,
    matings: CsvFile,
    zones: Option<CsvFile>,
}

impl RunLogger {
    pub fn create(
        dir: &Path,
        logging: LoggingConfig,
        zones_active: bool,
        config_toml: &str,
    ) -> Result<Self, HarnessError> {
        ensure_dir(dir)?;
        if logging.trajectories {
            ensure_dir(&dir.join("trajectories"))?;
        }
        if logging.genomes {
            ensure_dir(&dir.join("genomes"))?;
        }
        let cfg_path = dir.join("config.toml");
        fs::write(&cfg_path, config_toml).map_err(io_err(&cfg_path))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            logging,
            generations: CsvFile::create(dir.join("generations.csv"), GENERATION_HEADER)?,
            matings: CsvFile::create(dir.join("matings.csv"), MATING_HEADER)?,
            zones: if zones_active {
                Some(CsvFile::create(dir.join("zones.csv"), ZONE_HEADER)?)
            } else {
                None
            },
        })
    }

    pub fn snapshot(&self, generation: u32, population: &[Individual]) -> Result<(), HarnessError> {
        if !self.logging.genomes {
            return Ok(());
        }
        let path = self.dir.join("genomes").join(format!("gen_{generation}.txt"));
        let mut w = create(&path)?;
        w.write_all(format_snapshot(population).as_bytes())
            .and_then(|_| w.flush())
            .map_err(io_err(&path))
    }

    pub fn generation(
        &mut self,
        report: &GenerationReport,
        population: &[Individual],
    ) -> Result<(), HarnessError> {
        let g = report.record.generation;
        self.generations.row(&GenerationRow::from(&report.record))?;
        for p in &report.pairs {
            self.matings.row(&MatingRow {
                generation: g,
                parent_a: p.first,
                parent_b: p.second,
                distance: p.distance,
                zone: p.zone.map_or(-1, |z| z as i64),
            })?;
        }
        if let Some(zones) = &mut self.zones {
            for (k, z) in report.zones.iter().enumerate() {
                zones.row(&ZoneRow {
                    generation: g,
                    zone: k,
                    x: z.center.x(),
                    y: z.center.y(),
                    radius: z.radius,
                })?;
            }
        }
        if self.logging.trajectories {
            let path = self.dir.join("trajectories").join(format!("gen_{g}.csv"));
            let mut t = CsvFile::create(path, TRAJECTORY_HEADER)?;
            let stride = self.logging.trajectory_stride.max(1);
            let agents = report.agent_ids.iter().zip(&report.agent_fitness);
            for ((&id, &fitness), path) in agents.zip(&report.mating.trajectories) {
                let last = path.len();
                for (k, p) in path.iter().enumerate() {
                    let tick = k + 1;
                    if tick % stride == 0 || tick == last {
                        t.row(&TrajectoryRow { generation: g, id, tick, x: p.x(), y: p.y(), fitness })?;
                    }
                }
            }
            t.finish()?;
        }
        self.snapshot(g, population)
    }

    pub fn finish(self, outcome: &OutcomeLine) -> Result<(), HarnessError> {
        self.generations.finish()?;
        self.matings.finish()?;
        if let Some(z) = self.zones {
            z.finish()?;
        }
        write_outcomes(&self.dir.join("outcome.jsonl"), std::slice::from_ref(outcome))
    }
}

pub fn format_snapshot(population: &[Individual]) -> String {
    let mut out = String::new();
    for i in population {
        out.push_str(&format!(
            "# individual {} fitness {} age {} energy {}\n",
            i.id, i.fitness, i.age, i.energy
        ));
        out.push_str(&i.genome.to_text());
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotEntry {
    pub id: u64,
    pub fitness: f64,
    pub age: u32,
    pub energy: f64,
    pub genome: Genome,
}

/// Inverse of [`format_snapshot`].
pub fn parse_snapshot(text: &str) -> Result<Vec<SnapshotEntry>, String> {
    let mut entries = Vec::new();
    let mut header: Option<(usize, [&str; 4])> = None;
    let mut body = String::new();
    let mut flush = |header: Option<(usize, [&str; 4])>, body: &str| -> Result<(), String> {
        if let Some((line, [id, fitness, age, energy])) = header {
            let bad = |what: &str| format!("line {line}: bad {what}");
            entries.push(SnapshotEntry {
                id: id.parse().map_err(|_| bad("id"))?,
                fitness: fitness.parse().map_err(|_| bad("fitness"))?,
                age: age.parse().map_err(|_| bad("age"))?,
                energy: energy.parse().map_err(|_| bad("energy"))?,
                genome: parse_genome(body).map_err(|e| format!("individual {id}: {e}"))?,
            });
        }
        Ok(())
    };
    for (k, line) in text.lines().enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if let ["#", "individual", id, "fitness", f, "age", a, "energy", e] = parts[..] {
            flush(header.take(), &body)?;
            body.clear();
            header = Some((k + 1, [id, f, a, e]));
        } else if header.is_none() && !line.trim().is_empty() {
            return Err(format!("line {}: record before individual header", k + 1));
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    flush(header, &body)?;
    Ok(entries)
}

pub fn write_outcomes(path: &Path, lines: &[OutcomeLine]) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    for l in lines {
        let json = serde_json::to_string(l).expect("outcome serializes");
        writeln!(w, "{json}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_outcomes(path: &Path) -> Result<Vec<OutcomeLine>, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::Format {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", k + 1),
            })
        })
        .collect()
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), HarnessError> {
    let mut f = CsvFile::create(path.to_path_buf(), header)?;
    for r in rows {
        f.row(r)?;
    }
    f.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{init_genome, InnovationRegistry, VariationRates};
    use crate::world::{wrap_position, Vec2, WorldConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn snapshot_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut reg = InnovationRegistry::new();
        let pop: Vec<Individual> = (0..4)
            .map(|i| Individual {
                id: 10 + i,
                genome: init_genome(&mut rng, &VariationRates::default(), &mut reg),
                position: wrap_position(Vec2::new(1.0, 2.0), &WorldConfig::default()),
                heading: 0.0,
                fitness: 0.125 * i as f64,
                age: i as u32,
                energy: 100.0 - 5.0 * i as f64,
                assigned_zone: None,
            })
            .collect();
        let parsed = parse_snapshot(&format_snapshot(&pop)).unwrap();
        assert_eq!(parsed.len(), 4);
        for (e, i) in parsed.iter().zip(&pop) {
            assert_eq!((e.id, e.fitness, e.age, e.energy), (i.id, i.fitness, i.age, i.energy));
            assert_eq!(e.genome, i.genome);
        }
        assert!(parse_snapshot("node 0 input identity\n").is_err());
        assert_eq!(parse_snapshot("").unwrap(), vec![]);
    }

    #[test]
    fn optional_fields_are_empty_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let row = GenerationRow {
            generation: 3,
            population: 0,
            births: 0,
            deaths: 2,
            best_fitness: None,
            mean_fitness: None,
            median_fitness: None,
            std_fitness: None,
            matings: 0,
            mean_pair_distance: None,
            dispersion: None,
            mean_energy: None,
            zone_occupancy: String::new(),
        };
        write_csv(&path, GENERATION_HEADER, std::slice::from_ref(&row)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().nth(1), Some("3,0,0,2,,,,,0,,,,"));
        assert_eq!(read_csv::<GenerationRow>(&path).unwrap(), vec![row]);
    }
}
