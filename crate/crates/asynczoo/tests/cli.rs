//! CLI contract: config round-trips, report layout, exit codes.

use asynczoo::cli::{
    blend_demo, build_problem, cmd_run, exit_code_for, report_json, resolve_plan, verify_bounds,
    DelayKind, ExperimentConfig, ProblemSpec, EXIT_INVALID, EXIT_PREREQUISITE,
};
use asynczoo::error::Error;
use asynczoo::stepsize::Variant;
use std::process::Command;

fn quad_config(out: Option<std::path::PathBuf>) -> ExperimentConfig {
    ExperimentConfig {
        variant: Variant::AsgdInconsistent,
        problem: ProblemSpec::Quadratic { n: 12, condition: 5.0, components: 4 },
        k: 3000,
        threads: 0,
        t: 0,
        seed: 77,
        snapshot_stride: 500,
        output: out,
        ..ExperimentConfig::default()
    }
}

#[test]
fn config_round_trips_through_json() {
    let cfg = quad_config(Some("x.json".into()));
    let text = cfg.to_json().unwrap();
    let back = ExperimentConfig::from_json(&text).unwrap();
    assert_eq!(back, cfg);

    let blend = ExperimentConfig {
        problem: ProblemSpec::Blend { rows: 100, models: 5, noise_std: 0.5 },
        mu: Some(0.01),
        gamma: Some(1e-4),
        delay: DelayKind::Fixed,
        ..ExperimentConfig::default()
    };
    let back = ExperimentConfig::from_json(&blend.to_json().unwrap()).unwrap();
    assert_eq!(back, blend);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let err = ExperimentConfig::from_json(r#"{"variant":"aszd","bogus":1}"#);
    assert!(matches!(err, Err(Error::Parse(_))));
    let err = ExperimentConfig::from_json(
        r#"{"problem":{"kind":"quadratic","n":4,"condition":2.0,"components":2,"extra":5}}"#,
    );
    assert!(matches!(err, Err(Error::Parse(_))));
}

#[test]
fn run_command_writes_report_config_and_build_id() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let cfg = quad_config(Some(path.clone()));
    let mut log = Vec::new();
    cmd_run(&cfg, &mut log).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "variant",
        "threads",
        "k_done",
        "wall_time_s",
        "observed_staleness_max",
        "step_plan",
        "grad_norm_sq",
        "objective",
        "final_x",
        "config",
        "build_id",
    ] {
        assert!(value.get(key).is_some(), "report is missing key {key}");
    }
    let plan_keys = value["step_plan"].as_object().unwrap();
    for key in ["alpha1", "alpha2", "alpha3", "gamma", "t_max", "theta_ok", "rate_bound", "variant"]
    {
        assert!(plan_keys.contains_key(key), "step plan is missing {key}");
    }
    assert_eq!(plan_keys.len(), 8);
    // Round-trip of the embedded config reproduces the input.
    let embedded: ExperimentConfig = serde_json::from_value(value["config"].clone()).unwrap();
    assert_eq!(embedded, cfg);
    // The trace CSVs exist and carry the documented header.
    let obj = std::fs::read_to_string(dir.path().join("report_objective.csv")).unwrap();
    assert!(obj.starts_with("k,value\n"));
    let grad = std::fs::read_to_string(dir.path().join("report_grad_norm_sq.csv")).unwrap();
    assert!(grad.starts_with("k,value\n"));
    let summary = String::from_utf8(log).unwrap();
    assert!(summary.contains("gamma"));
    assert!(summary.contains("rate_bound"));
}

#[test]
fn simulator_runs_are_reproducible_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.json");
    let p2 = dir.path().join("b.json");
    let mut log = Vec::new();
    let mut cfg = quad_config(Some(p1.clone()));
    cmd_run(&cfg, &mut log).unwrap();
    cfg.output = Some(p2.clone());
    cmd_run(&cfg, &mut log).unwrap();
    let a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&p1).unwrap()).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&p2).unwrap()).unwrap();
    // Identical up to the embedded output path.
    let strip = |mut v: serde_json::Value| {
        v["config"].as_object_mut().unwrap().remove("output");
        v
    };
    assert_eq!(strip(a), strip(b));
}

#[test]
fn smoothing_step_on_a_gradient_variant_is_a_validation_error() {
    let mut cfg = quad_config(None);
    cfg.variant = Variant::Ascd;
    cfg.mu = Some(0.1);
    let err = cmd_run(&cfg, &mut Vec::new()).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
    assert_eq!(exit_code_for(&err), EXIT_INVALID);
}

#[test]
fn unstable_override_exits_with_the_prerequisite_code() {
    let mut cfg = quad_config(None);
    cfg.gamma = Some(1e6);
    let err = cmd_run(&cfg, &mut Vec::new()).unwrap_err();
    assert!(matches!(err, Error::Prerequisite(_)));
    assert_eq!(exit_code_for(&err), EXIT_PREREQUISITE);
}

#[test]
fn verification_suite_passes_on_defaults() {
    let cfg = quad_config(None);
    let checks = verify_bounds(&cfg).unwrap();
    assert!(checks.len() >= 6);
    for c in &checks {
        assert!(c.pass, "check '{}' failed: {}", c.name, c.detail);
    }
}

#[test]
fn verification_suite_reports_an_injected_bad_step() {
    let mut cfg = quad_config(None);
    cfg.gamma = Some(1e6);
    let checks = verify_bounds(&cfg).unwrap();
    assert!(checks
        .iter()
        .any(|c| !c.pass && c.name.contains("configured run")));
}

#[test]
fn blend_demo_recovers_toward_the_noise_floor_at_small_scale() {
    let cfg = ExperimentConfig {
        variant: Variant::Aszd,
        problem: ProblemSpec::Blend { rows: 400, models: 10, noise_std: 0.3 },
        k: 40_000,
        threads: 0,
        t: 0,
        seed: 5,
        snapshot_stride: 1000,
        output: None,
        ..ExperimentConfig::default()
    };
    let result = blend_demo(&cfg).unwrap();
    assert!(result.final_heldout_rmse < result.baseline_rmse);
    assert!(result.final_heldout_rmse < 0.45, "rmse {}", result.final_heldout_rmse);
    assert_eq!(
        result.heldout_trace.last().map(|&(_, v)| v),
        Some(result.final_heldout_rmse)
    );
}

#[test]
fn frozen_coefficients_score_the_baseline_rmse() {
    let cfg = ExperimentConfig {
        variant: Variant::Aszd,
        problem: ProblemSpec::Blend { rows: 200, models: 6, noise_std: 0.2 },
        seed: 9,
        ..ExperimentConfig::default()
    };
    let built = build_problem(&cfg.problem, cfg.seed).unwrap();
    let blend = built.as_blend().unwrap();
    let zeros = vec![0.0; 6];
    let frozen = ExperimentConfig { k: 1, snapshot_stride: 0, gamma: Some(1e-9), ..cfg };
    let result = blend_demo(&frozen).unwrap();
    assert_eq!(result.baseline_rmse, blend.heldout_rmse(&zeros).unwrap());
}

#[test]
fn report_json_embeds_without_output_file() {
    let cfg = quad_config(None);
    let built = build_problem(&cfg.problem, cfg.seed).unwrap();
    let (plan, _) = resolve_plan(&cfg, built.as_dyn()).unwrap();
    let report = asynczoo::cli::execute(&cfg, built.as_dyn(), &plan).unwrap();
    let value = report_json(&report, &cfg).unwrap();
    assert!(value["build_id"].as_str().unwrap().starts_with("asynczoo-"));
}

// ---- process-level checks of the installed binary -----------------------

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asynczoo"))
}

#[test]
fn binary_reports_prerequisite_violations_with_exit_two() {
    let out = bin()
        .args([
            "run",
            "--variant",
            "asgd_inconsistent",
            "--problem",
            "quadratic",
            "--n",
            "8",
            "--k",
            "100",
            "--gamma",
            "1e6",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn binary_rejects_bad_flags_with_exit_three() {
    let out = bin().args(["run", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = bin()
        .args(["run", "--variant", "ascd", "--mu", "0.1", "--k", "10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn binary_honors_the_thread_cap_env_var() {
    let out = bin()
        .env("ASYNCZOO_THREAD_CAP", "2")
        .args([
            "run",
            "--variant",
            "asgd_inconsistent",
            "--problem",
            "quadratic",
            "--n",
            "8",
            "--k",
            "200",
            "--threads",
            "4",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("cap"), "stderr: {msg}");
}

#[test]
fn binary_bench_requires_the_baseline() {
    let out = bin()
        .args([
            "bench-speedup",
            "--threads-list",
            "2,4",
            "--problem",
            "quadratic",
            "--n",
            "8",
            "--k",
            "100",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn binary_runs_a_small_experiment_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = bin()
        .args([
            "run",
            "--variant",
            "aszd",
            "--problem",
            "quadratic",
            "--n",
            "10",
            "--condition",
            "4",
            "--components",
            "3",
            "--k",
            "2000",
            "--threads",
            "0",
            "--seed",
            "7",
            "--out",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(path.exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("theta_ok"));
}
