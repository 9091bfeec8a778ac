use std::path::Path;
use std::process::{Command, Output};

use mixfbm::experiment::ExperimentReport;
use mixfbm::io::read_trajectory_batch;
use mixfbm::StatsBatch;

fn mixfbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixfbm")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        r#"
[grid]
horizon = 2.0
dt = 0.02

[population]
trajectories = 10

[run]
replications = 3
master_seed = 7
"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_stats_estimate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().to_str().unwrap();

    let sim = mixfbm(&["--config", &cfg, "--out-dir", out, "simulate", "--csv"]);
    assert_eq!(code(&sim), 0, "{}", String::from_utf8_lossy(&sim.stderr));
    let batch = read_trajectory_batch(std::fs::File::open(dir.path().join("batch.sdeb")).unwrap()).unwrap();
    assert_eq!(batch.len(), 10);
    assert_eq!(batch.grid.steps(), 100);
    let csv = std::fs::read_to_string(dir.path().join("trajectory_3.csv")).unwrap();
    assert!(csv.starts_with("t,value\n"));
    assert_eq!(csv.lines().count(), 102);

    let batch_path = dir.path().join("batch.sdeb");
    let stats = mixfbm(&["--out-dir", out, "stats", "--input", batch_path.to_str().unwrap()]);
    assert_eq!(code(&stats), 0, "{}", String::from_utf8_lossy(&stats.stderr));
    let from_csv = StatsBatch::read_csv(std::fs::File::open(dir.path().join("stats.csv")).unwrap()).unwrap();
    let from_json = StatsBatch::read_json(std::fs::File::open(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(from_csv.stats.len(), 10);
    assert_eq!(from_json.provenance.as_ref().unwrap().steps, 100);
    for (a, b) in from_csv.stats.iter().zip(&from_json.stats) {
        assert_eq!((a.u, a.v), (b.u, b.v));
    }

    for input in ["stats.csv", "stats.json"] {
        let p = dir.path().join(input);
        let est = mixfbm(&["--out-dir", out, "estimate", "--input", p.to_str().unwrap()]);
        assert_eq!(code(&est), 0, "{}", String::from_utf8_lossy(&est.stderr));
        let v: serde_json::Value = serde_json::from_slice(&est.stdout).unwrap();
        assert!(v["theta_hat"]["mu"].as_f64().unwrap().is_finite());
        assert!(v["theta_hat"]["sigma0_sq"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn experiment_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    let res = mixfbm(&["--config", &cfg, "--out-dir", out.to_str().unwrap(), "experiment"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["report.json", "replications.csv", "summary.csv", "run_info.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report: ExperimentReport = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.replications.len(), 3);
    assert_eq!(report.config.run.master_seed, 7);
    assert_eq!(mixfbm::experiment::Summary::of(&report.replications), report.summary);
    let csv = std::fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let res = mixfbm(&["--config", &cfg, "--replications", "9", "--drift", "affine:1,1", "--hurst", "0.9", "print-config"]);
    assert_eq!(code(&res), 0);
    let text = String::from_utf8(res.stdout).unwrap();
    let c = mixfbm::experiment::ExperimentConfig::from_toml_str(&text).unwrap();
    assert_eq!(c.run.replications, 9);
    assert_eq!(c.run.master_seed, 7);
    assert_eq!(c.model.hurst, 0.9);
    assert_eq!(c.model.drift, mixfbm::DriftModel::affine(1.0, 1.0));
}

#[test]
fn exit_codes() {
    assert_eq!(code(&mixfbm(&["print-config"])), 0);
    assert_eq!(code(&mixfbm(&["no-such-command"])), 1);
    assert_eq!(code(&mixfbm(&["--hurst", "1.2", "print-config"])), 1);
    assert_eq!(code(&mixfbm(&["--dt", "0.03", "experiment"])), 1);
    assert_eq!(code(&mixfbm(&["--config", "/nonexistent/x.toml", "print-config"])), 1);

    // Every path explodes: a numerical failure.
    let dir = tempfile::tempdir().unwrap();
    let res = mixfbm(&[
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--horizon",
        "1",
        "--trajectories",
        "4",
        "--replications",
        "2",
        "--drift",
        "affine:0,1",
        "--mu",
        "30",
        "--sigma0-sq",
        "0",
        "--blowup-guard",
        "5",
        "experiment",
    ]);
    assert_eq!(code(&res), 2, "{}", String::from_utf8_lossy(&res.stderr));
}
