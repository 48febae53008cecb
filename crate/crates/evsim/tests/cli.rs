//! Smoke tests of the simctl binary: exit codes and output files.

use std::process::Command;

fn simctl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simctl"))
}

#[test]
fn run_writes_metrics_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let status = simctl()
        .args([
            "run",
            "--profile",
            "constant-loading",
            "--seed",
            "3",
            "--duration",
            "86400",
            "--reports",
            "--out-dir",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let metrics = dir.path().join("ConstantLoading_metrics.json");
    assert!(metrics.exists());
    let csv = std::fs::read_to_string(dir.path().join("ConstantLoading_daily_loadings.csv")).unwrap();
    assert!(csv.starts_with("substation_id,day,max_loading,mean_loading\n"));
    assert!(!csv.contains('\r'));

    // report subcommand round-trips the stored metrics
    let report_dir = tempfile::tempdir().unwrap();
    let status = simctl()
        .args(["report", "--metrics"])
        .arg(&metrics)
        .arg("--out-dir")
        .arg(report_dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(report_dir.path().join("ConstantLoading_rewards.csv").exists());
}

#[test]
fn generate_scenario_then_run_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    assert!(simctl()
        .args(["generate-scenario", "--seed", "5", "--out"])
        .arg(&cfg)
        .status()
        .unwrap()
        .success());
    assert!(simctl()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--duration", "3600", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap()
        .success());
}

#[test]
fn tours_extract_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let trips = dir.path().join("trips.csv");
    std::fs::write(
        &trips,
        "id,from_edge,to_edge,depart\nt1,A,B,28800\nt2,B,A,61200\nt3,C,D,30000\n",
    )
    .unwrap();
    let out = dir.path().join("tours.txt");
    assert!(simctl()
        .args(["tours-extract", "--trips"])
        .arg(&trips)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("evsim-tours v1\n"));
    assert_eq!(text.lines().count(), 4); // version, header, 2 trips
}

#[test]
fn sweep_over_config_files_tolerates_one_failure() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    assert!(simctl()
        .args(["generate-scenario", "--seed", "2", "--out"])
        .arg(&good)
        .status()
        .unwrap()
        .success());
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 99\n").unwrap();
    let out = dir.path().join("sweep");
    let status = simctl()
        .arg("sweep")
        .arg("--configs")
        .arg(format!("{},{}", good.display(), bad.display()))
        .args(["--parallelism", "2", "--duration", "3600", "--out-dir"])
        .arg(&out)
        .status()
        .unwrap();
    // the bad config fails the sweep, but the good run still completes
    assert!(!status.success());
    assert!(out.join("good").join("LinUcbDisjunct_metrics.json").exists());
}

#[test]
fn bad_inputs_exit_nonzero() {
    let status = simctl().args(["run", "--config", "/nonexistent.toml"]).status().unwrap();
    assert!(!status.success());
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 99\n").unwrap();
    let status = simctl().args(["run", "--config"]).arg(&bad).status().unwrap();
    assert!(!status.success());
}
