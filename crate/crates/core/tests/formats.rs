//! The files a downstream plotting tool reads: outcome tables for heatmaps,
//! per-generation curves, trajectories with zones, genome snapshots.

use std::collections::BTreeMap;
use std::path::Path;

use spatial_ea::harness::logs::{
    parse_snapshot, read_csv, read_outcomes, GenerationRow, MatingRow, TrajectoryRow, ZoneRow,
};
use spatial_ea::harness::{
    analyze_outcomes, load_config, run_experiment, run_sweep, ExperimentConfig, RunStatus,
    SweepSpec,
};
use spatial_ea::world::{periodic_distance, wrap_position, Vec2, WorldConfig};

fn quick() -> ExperimentConfig {
    load_config(
        r#"
[kinematics]
eval_duration = 2.0
mating_duration = 2.0
[parent_selection]
strategy = "zones"
zone_count = 5
relocation = "event-driven"
bias = "assigned-zone"
[death]
mechanism = "energy"
[engine]
generations = 25
initial_population = 16
[logging]
trajectories = true
trajectory_stride = 25
genomes = true
"#,
    )
    .unwrap()
}

#[derive(Debug, serde::Deserialize)]
struct TableRow {
    cell: String,
    runs: usize,
    extinct: usize,
    exploded: usize,
    completed: usize,
    failed: usize,
    phi: Option<f64>,
    mean_final_population: Option<f64>,
    mean_best_fitness: Option<f64>,
    #[allow(dead_code)]
    mean_final_generation: Option<f64>,
}

#[test]
fn table_matches_recomputed_outcome_means() {
    let grid = "[[axis]]\npath = \"parent_selection.zone_count\"\nvalues = [2, 6]\n\n\
                [[axis]]\npath = \"death.mating_cost\"\nvalues = [10.0, 50.0]\n";
    let mut cfg = quick();
    cfg.engine.generations = 8;
    cfg.logging.trajectories = false;
    let spec = SweepSpec::parse(cfg, grid).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    run_sweep(&spec, 3, 9, 2, Some(tmp.path())).unwrap();

    let lines = read_outcomes(&tmp.path().join("outcomes.jsonl")).unwrap();
    let table: Vec<TableRow> = read_csv(&tmp.path().join("table.csv")).unwrap();
    assert_eq!(table.len(), 4);
    let mut by_cell: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for l in &lines {
        by_cell.entry(l.cell.as_str()).or_default().push(l);
    }
    for row in &table {
        let runs = &by_cell[row.cell.as_str()];
        assert_eq!(row.runs, runs.len());
        assert_eq!(row.extinct + row.exploded + row.completed + row.failed, 3);
        let mean_pop = runs.iter().map(|r| r.final_population as f64).sum::<f64>() / runs.len() as f64;
        assert_eq!(format!("{:.3}", row.mean_final_population.unwrap()), format!("{mean_pop:.3}"));
        let fits: Vec<f64> = runs.iter().filter_map(|r| r.best_fitness).collect();
        let mean_fit = fits.iter().sum::<f64>() / fits.len() as f64;
        assert_eq!(format!("{:.3}", row.mean_best_fitness.unwrap()), format!("{mean_fit:.3}"));
        let ext = runs.iter().filter(|r| r.status == RunStatus::Extinct).count() as f64;
        let exp = runs.iter().filter(|r| r.status == RunStatus::Exploded).count() as f64;
        assert_eq!(row.phi, Some((exp - ext) / 3.0));
        // The label encodes the axis values carried in params.
        let p = &runs[0].params;
        assert!(row.cell.contains(&format!("parent_selection.zone_count={}", p["parent_selection.zone_count"])));
    }
    let a = analyze_outcomes(&lines, "death.mating_cost").unwrap();
    assert_eq!(a.phi.iter().map(|r| r.value).collect::<Vec<_>>(), vec![10.0, 50.0]);
    assert!(a.phi.iter().all(|r| r.runs == 6));
}

fn run_into(dir: &Path, cfg: &ExperimentConfig, seed: u64) {
    run_experiment(cfg, seed, Some(dir), "base", 0, 0, &BTreeMap::new()).unwrap();
}

#[test]
fn generation_and_mating_logs_are_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick();
    run_into(tmp.path(), &cfg, 4);
    let gens: Vec<GenerationRow> = read_csv(&tmp.path().join("generations.csv")).unwrap();
    let matings: Vec<MatingRow> = read_csv(&tmp.path().join("matings.csv")).unwrap();
    assert!(!gens.is_empty());
    for (k, g) in gens.iter().enumerate() {
        assert_eq!(g.generation as usize, k + 1);
        let m: Vec<&MatingRow> = matings.iter().filter(|m| m.generation == g.generation).collect();
        assert_eq!(m.len(), g.matings);
        assert_eq!(g.births, g.matings * cfg.engine.offspring_per_pair);
        assert!(m.iter().all(|r| r.zone >= 0 && r.zone < 5 && r.distance <= 10.0));
        assert_eq!(g.zone_occupancy.split(';').count(), 5);
    }
    for w in gens.windows(2) {
        assert_eq!(w[1].population, w[0].population + w[1].births - w[1].deaths);
    }
}

#[test]
fn snapshots_obey_age_and_energy_laws() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick();
    run_into(tmp.path(), &cfg, 8);
    let matings: Vec<MatingRow> = read_csv(&tmp.path().join("matings.csv")).unwrap();
    let gens: Vec<GenerationRow> = read_csv(&tmp.path().join("generations.csv")).unwrap();
    let mut mated_by: BTreeMap<u64, usize> = BTreeMap::new();
    for g in 0..=gens.len() as u32 {
        for m in matings.iter().filter(|m| m.generation == g) {
            *mated_by.entry(m.parent_a).or_default() += 1;
            *mated_by.entry(m.parent_b).or_default() += 1;
        }
        let text = std::fs::read_to_string(tmp.path().join(format!("genomes/gen_{g}.txt"))).unwrap();
        for e in parse_snapshot(&text).unwrap() {
            assert!(e.age <= g);
            let n = mated_by.get(&e.id).copied().unwrap_or(0) as f64;
            let expected = 100.0 - 5.0 * e.age as f64 - cfg.death.mating_cost * n;
            assert_eq!(e.energy, expected, "id {} gen {g}", e.id);
            assert!(e.energy > 0.0);
            e.genome.validate().unwrap();
        }
    }
}

#[test]
fn trajectories_stay_in_world_and_match_zones() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick();
    run_into(tmp.path(), &cfg, 2);
    let world = WorldConfig::default();
    let zones: Vec<ZoneRow> = read_csv(&tmp.path().join("zones.csv")).unwrap();
    assert!(zones.iter().all(|z| z.radius == 2.0));
    let g1: Vec<TrajectoryRow> = read_csv(&tmp.path().join("trajectories/gen_1.csv")).unwrap();
    let ticks = (cfg.kinematics.mating_duration / cfg.kinematics.dt).round() as usize;
    let mut per_agent: BTreeMap<u64, Vec<&TrajectoryRow>> = BTreeMap::new();
    for r in &g1 {
        assert!((0.0..25.0).contains(&r.x) && (0.0..25.0).contains(&r.y));
        assert!(r.tick % 25 == 0 || r.tick == ticks);
        per_agent.entry(r.id).or_default().push(r);
    }
    assert_eq!(per_agent.len(), cfg.engine.initial_population);
    let max_hop = cfg.kinematics.forward_gain * cfg.kinematics.max_joint_rate * cfg.kinematics.dt * 25.0;
    for rows in per_agent.values() {
        assert_eq!(rows.len(), ticks / 25);
        for w in rows.windows(2) {
            let a = wrap_position(Vec2::new(w[0].x, w[0].y), &world);
            let b = wrap_position(Vec2::new(w[1].x, w[1].y), &world);
            // Consecutive samples are close on the torus even across the seam.
            assert!(periodic_distance(a, b, &world) <= max_hop + 1e-9);
        }
    }
    let g1_zones: Vec<&ZoneRow> = zones.iter().filter(|z| z.generation == 1).collect();
    assert_eq!(g1_zones.len(), 5);
}

#[test]
fn run_logs_are_reproducible() {
    let cfg = quick();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into(a.path(), &cfg, 77);
    run_into(b.path(), &cfg, 77);
    for f in ["generations.csv", "matings.csv", "zones.csv", "outcome.jsonl", "trajectories/gen_3.csv", "genomes/gen_3.txt"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}
