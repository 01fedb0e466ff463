use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spatial-ea"));
    c.env_remove("SPATIAL_EA_OUT");
    c
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const QUICK: &str = r#"
[kinematics]
eval_duration = 1.0
mating_duration = 1.0

[parent_selection]
strategy = "zones"
zone_count = 6
bias = "assigned-zone"

[death]
mechanism = "energy"

[engine]
generations = 6
initial_population = 12

[logging]
trajectories = true
trajectory_stride = 10
genomes = true
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "good.toml", QUICK);
    let bad = write(tmp.path(), "bad.toml", "[parent_selection]\npairing_radius = -3.0\n");
    let unknown = write(tmp.path(), "unknown.toml", "[engine]\ngenerationz = 3\n");

    let out = bin().args(["validate", "--config"]).arg(&good).output().unwrap();
    assert!(out.status.success());

    let out = bin().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parent_selection.pairing_radius"));

    let out = bin().args(["validate", "--config"]).arg(&unknown).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("generationz"));

    let grid = write(tmp.path(), "grid.toml", "[[axis]]\npath = \"engine.nope\"\nvalues = [1]\n");
    let out = bin()
        .args(["validate", "--config"])
        .arg(&good)
        .arg("--grid")
        .arg(&grid)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("engine.nope"));
}

#[test]
fn run_writes_the_documented_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "q.toml", QUICK);
    let out = tmp.path().join("out");
    let stdout = ok(bin()
        .args(["run", "--seed", "5", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    let line: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    let dir = out.join("base").join("5");
    for f in ["config.toml", "generations.csv", "matings.csv", "zones.csv", "outcome.jsonl", "genomes/gen_0.txt"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let last = line["final_generation"].as_u64().unwrap();
    assert!(dir.join(format!("trajectories/gen_{last}.csv")).is_file());
    assert!(dir.join(format!("genomes/gen_{last}.txt")).is_file());
    let outcome = std::fs::read_to_string(dir.join("outcome.jsonl")).unwrap();
    assert_eq!(outcome.trim(), stdout.trim());
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "q.toml", QUICK);
    let root = tmp.path().join("from_env");
    ok(bin()
        .env("SPATIAL_EA_OUT", &root)
        .args(["run", "--seed", "1", "--config"])
        .arg(&cfg)
        .output()
        .unwrap());
    assert!(root.join("base/1/generations.csv").is_file());
}

#[test]
fn sweep_then_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "q.toml", QUICK);
    let grid = write(
        tmp.path(),
        "grid.toml",
        "[[axis]]\npath = \"parent_selection.zone_count\"\nvalues = [2, 8]\n\n\
         [[axis]]\npath = \"death.mating_cost\"\nvalues = [10.0, 50.0]\n",
    );
    let out = tmp.path().join("sweep");
    let stdout = ok(bin()
        .args(["sweep", "--runs", "2", "--workers", "2", "--config"])
        .arg(&cfg)
        .arg("--grid")
        .arg(&grid)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    assert_eq!(stdout.lines().count(), 5);
    let outcomes = std::fs::read_to_string(out.join("outcomes.jsonl")).unwrap();
    assert_eq!(outcomes.lines().count(), 8);
    assert!(out.join("table.csv").is_file());

    let stdout = ok(bin().args(["analyze", "--out"]).arg(&out).output().unwrap());
    assert!(stdout.contains("critical point"));
    for f in ["phi.csv", "summary.csv", "critical_point.txt"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let phi = std::fs::read_to_string(out.join("phi.csv")).unwrap();
    assert_eq!(phi.lines().next(), Some("value,runs,extinct,exploded,completed,failed,phi"));
    assert_eq!(phi.lines().count(), 3);
}

#[test]
fn analyze_reports_missing_input() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin().args(["analyze", "--out"]).arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outcomes.jsonl"));
}
