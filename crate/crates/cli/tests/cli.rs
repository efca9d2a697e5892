use std::path::Path;
use std::process::{Command, Output};

fn cogsense(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogsense"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("COGSENSE_OUT_DIR")
        .output()
        .expect("binary runs")
}

#[test]
fn offline_table_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = cogsense(&["offline-table"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("offline_table.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "p0,c0,n,action,j_star");
    assert_eq!(rows.len(), 9);
    assert!(rows[4].starts_with("0.5,0.23,1,guess,"));
}

#[test]
fn simulate_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--runs",
        "2",
        "--horizon",
        "50",
        "--seed",
        "4",
        "--algorithms",
        "alg1,thompson",
    ];
    let out = cogsense(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("average_regret.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,log10_t,j_star,alg1,thompson"));
    assert_eq!(csv.lines().count(), 51);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([4, 5]));
}

#[test]
fn config_file_and_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "horizon = 30\nruns = 1\nalgorithms = [\"offline\"]\n\n[system]\nthetas = [0.8, 0.3]\n\
         reward = { mean = 1.0, width = 0.1 }\nsense_cost = { mean = 0.1, width = 0.0 }\ntx_cost = { lower = 0.2, width = 0.2 }\n",
    )
    .unwrap();
    let env_dir = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_cogsense"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .env("COGSENSE_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env_dir.join("per_frame_reward.csv").exists());
}

#[test]
fn bad_config_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "horizon = -3\n[system]\nthetas = [0.5]\n").unwrap();
    let out = cogsense(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml") && err.contains("horizon"), "{err}");
}

#[test]
fn degenerate_bounds_exit_zero_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tied.toml");
    std::fs::write(
        &cfg,
        "[system]\nthetas = [0.5, 0.5, 0.2]\nreward = { mean = 1.0, width = 0.1 }\n\
         sense_cost = { mean = 0.1, width = 0.1 }\ntx_cost = { mean = 0.3, width = 0.1 }\n",
    )
    .unwrap();
    let out = cogsense(&["bounds", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
    assert!(report["recommended_exploration"]["error"]["DegenerateGap"].is_object());
}

#[test]
fn unknown_algorithm_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = cogsense(&["simulate", "--algorithms", "ucb"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ucb"));
}
