use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regretlab::adaptive_sim::ExplorationPolicy;
use regretlab::cli::commands::{cmd_single_run, ControllerKind, SingleRunRequest};
use regretlab::cli::config::ExperimentConfig;
use regretlab::cli::table::Table;
use regretlab::cli::{exit_code, EXIT_ALL_DIVERGED, EXIT_NON_CONVERGENCE};
use regretlab::Error;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_regretlab"));
    cmd.env_remove("REGRETLAB_SEED");
    cmd
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_SWEEP: &str = r#"{
  "horizon": 400,
  "sigma_grid": { "min": 1e-4, "max": 1e-1, "count": 4 },
  "beta_grid": { "min": 1e-3, "max": 1.0, "count": 4 },
  "alpha_grid": { "min": 1e-4, "max": 1.0, "count": 4 },
  "mc_reps_mvac": 12,
  "mc_reps_lqac": 6,
  "seed": 11
}"#;

#[test]
fn theory_reports_case_two_example() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", r#"{"W": 1, "Z": 1, "S": 1, "T": 2}"#);
    let out_path = dir.path().join("report.json");
    let out = run(&["theory", "--config", path_str(&spec), "--out", path_str(&out_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["case"], "Case2");
    assert!((report["c_t"].as_f64().unwrap() - 0.8).abs() < 1e-14);
    assert!((report["lower_bound"].as_f64().unwrap() - 1.44).abs() < 1e-12);
    assert!((report["upper_bound"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn theory_zero_noise_example() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", r#"{"W": 4, "Z": 1, "S": 0, "T": 100}"#);
    let out = run(&["theory", "--config", path_str(&spec)]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["case"], "Case3");
    assert!(report["c_t"].is_null());
    assert!((report["x1"].as_f64().unwrap() - 20.0).abs() < 1e-12);
    assert!((report["regret"].as_f64().unwrap() - 40.0).abs() < 1e-12);
}

#[test]
fn missing_horizon_exits_with_config_error() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", r#"{"W": 1, "Z": 1, "S": 1}"#);
    let out = run(&["theory", "--config", path_str(&spec)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`T`"));
}

#[test]
fn empty_grid_exits_with_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", r#"{"sigma_grid": {"min": 1e-5, "max": 1, "count": 0}}"#);
    let out = run(&["mvac-sweep", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma_grid"));
}

#[test]
fn all_diverged_exits_with_code_four() {
    // a near-zero b estimate held fixed blows the loop up; excluded runs leave nothing
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{"horizon": 300, "sigma_grid": {"min": 0.01, "max": 0.01, "count": 1},
            "beta_grid": {"min": 0.1, "max": 0.1, "count": 1}, "mc_reps_mvac": 4,
            "init": {"p_init_scale": 0, "a_init": 0.9, "b_init": 1e-5, "n_i": 3},
            "divergence": "exclude"}"#,
    );
    let out = run(&["mvac-sweep", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(EXIT_ALL_DIVERGED), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&Error::AllDiverged { count: 3 }), 4);
    let nc = Error::NonConvergence { solver: "x", iterations: 1, residual: 1.0, context: String::new() };
    assert_eq!(exit_code(&nc), EXIT_NON_CONVERGENCE);
    assert_eq!(exit_code(&Error::Config("x".into())), 2);
}

#[test]
fn mvac_sweep_csv_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", SMALL_SWEEP);
    let csv_path = dir.path().join("mvac.csv");
    let out = run(&["mvac-sweep", "--config", path_str(&cfg), "--out", path_str(&csv_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("crossover"));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("# regretlab "));
    assert!(text.lines().any(|l| l.starts_with("# config: {")));
    assert!(!text.contains('\r'));
    let table = Table::parse(&text).unwrap();
    assert_eq!(table.rows.len(), 4);
    assert_eq!(table.header[0], "sigma_e2");
    assert_eq!(table.to_string_csv(), text);
    // the echoed config reproduces the run
    let echoed = table.metadata.iter().find_map(|l| l.strip_prefix("config: ")).unwrap();
    let cfg2 = write(&dir, "echo.json", echoed);
    let again = run(&["mvac-sweep", "--config", path_str(&cfg2)]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn lqac_sweep_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", SMALL_SWEEP);
    let out = run(&["lqac-sweep", "--config", path_str(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = Table::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 4);
    assert_eq!(table.header.len(), 9);
    assert!(table.column("alpha_star").unwrap().iter().all(|&a| (1e-4..=1.0).contains(&a)));
}

#[test]
fn sweeps_ignore_thread_count_and_follow_seed_override() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", SMALL_SWEEP);
    let one = run(&["mvac-sweep", "--config", path_str(&cfg), "--threads", "1"]);
    let four = run(&["mvac-sweep", "--config", path_str(&cfg), "--threads", "4"]);
    assert_eq!(one.stdout, four.stdout);
    let reseeded = bin().args(["mvac-sweep", "--config", path_str(&cfg)]).env("REGRETLAB_SEED", "99").output().unwrap();
    assert!(reseeded.status.success());
    assert_ne!(reseeded.stdout, one.stdout);
    assert!(String::from_utf8_lossy(&reseeded.stdout).contains("\"seed\":99"));
    let bad = bin().args(["mvac-sweep", "--config", path_str(&cfg)]).env("REGRETLAB_SEED", "x").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn single_run_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", r#"{"horizon": 300}"#);
    let args = |out: &Path| {
        vec![
            "single-run".to_string(),
            "--config".into(),
            path_str(&cfg).into(),
            "--sigma-e2".into(),
            "0.01".into(),
            "--policy".into(),
            "decaying".into(),
            "--controller".into(),
            "lq".into(),
            "--index".into(),
            "3".into(),
            "--out".into(),
            path_str(out).into(),
        ]
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(bin().args(args(&a)).status().unwrap().success());
    assert!(bin().args(args(&b)).status().unwrap().success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let table = Table::read_file(&a).unwrap();
    assert_eq!(table.header, ["t", "y", "u", "w", "e", "cumulative_regret"]);
    assert_eq!(table.rows.len(), 300);
}

#[test]
fn exact_init_lazy_run_has_flat_cumulative_regret() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{"horizon": 500, "init": {"p_init_scale": 0, "a_init": -0.45, "b_init": 0.67, "n_i": 3}}"#,
    );
    let out = run(&["single-run", "--config", path_str(&cfg), "--sigma-e2", "0.3", "--index", "5"]);
    assert!(out.status.success());
    let table = Table::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let cum = table.column("cumulative_regret").unwrap();
    assert!(cum.iter().all(|&c| c == cum[0]));
}

#[test]
fn model_regret_round_trips_theory() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        &dir,
        "spec.json",
        r#"{"W": [[1, 0.3], [0.3, 2]], "Z": [[1, 0], [0, 0.5]], "S": [[0.4, 0], [0, 0]], "T": 200}"#,
    );
    let theory: Value = serde_json::from_slice(&run(&["theory", "--config", path_str(&spec)]).stdout).unwrap();
    let pulse = write(&dir, "pulse.json", &format!(r#"{{"kind": "pulse", "x1": {}}}"#, theory["x1"]));
    let out = run(&["model-regret", "--config", path_str(&spec), "--schedule", path_str(&pulse)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let (a, b) = (report["regret"].as_f64().unwrap(), theory["regret"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-12 * b);

    // singular S: the lazy schedule has infinite regret
    let zero = write(&dir, "zero.json", r#"{"kind": "zero"}"#);
    let out = run(&["model-regret", "--config", path_str(&spec), "--schedule", path_str(&zero)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn model_regret_zero_schedule_is_lazy_regret() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", r#"{"W": 2, "Z": 1, "S": 3, "T": 50}"#);
    let zero = write(&dir, "zero.json", r#"{"kind": "zero"}"#);
    let out = run(&["model-regret", "--config", path_str(&spec), "--schedule", path_str(&zero)]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let h: f64 = (1..=50).map(|t| 1.0 / t as f64).sum();
    assert!((report["regret"].as_f64().unwrap() - 2.0 / 3.0 * h).abs() < 1e-12);
}

#[test]
fn high_noise_lazy_runs_show_peaks() {
    let cfg = ExperimentConfig::default();
    let mut found = false;
    for index in 0..20 {
        let req =
            SingleRunRequest { controller: ControllerKind::Mv, policy: ExplorationPolicy::Lazy, sigma_e2: 0.1, index };
        let (trace, _) = cmd_single_run(&cfg, &req).unwrap();
        let mut steps = trace.regret.clone();
        steps.sort_by(f64::total_cmp);
        let median = steps[steps.len() / 2];
        if trace.regret.iter().any(|&r| r >= 10.0 * median) {
            found = true;
            break;
        }
    }
    assert!(found);
}
