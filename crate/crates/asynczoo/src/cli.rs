//! Command-line wiring: experiment configuration, the four subcommands, and
//! exit-code mapping.
//!
//! Exit codes: 0 success, 1 property-check failure, 2 theory-prerequisite
//! violation, 3 IO or validation error.

use crate::engine::{run_async, run_simulated, write_trace_csv, DelayModel, RunReport};
use crate::error::{Error, Result};
use crate::metrics::{ergodic_grad_norm, speedup, SpeedupMode, SpeedupTable};
use crate::objective::{
    estimate_sigma2, make_blend, make_noisy_blackbox, make_quadratic, make_trig_probe,
    read_blend_csv, Blend, NoisyBlackbox, Problem, Quadratic,
};
use crate::rng::stream_rng;
use crate::stepsize::{check_theta, plan, step_size, ProblemMeta, RunConfig, StepPlan, Variant};
use crate::zeroth_order::{estimate_block, smoothed_grad_coord, smoothed_value, MuVector};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILURE: i32 = 1;
pub const EXIT_PREREQUISITE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

/// Maps an error to the documented process exit code.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Prerequisite(_) => EXIT_PREREQUISITE,
        _ => EXIT_INVALID,
    }
}

/// Build identifier embedded into every report.
pub fn build_id() -> String {
    format!(
        "{}-{}+{}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        env!("ASYNCZOO_BUILD_ID")
    )
}

/// Which problem a run optimizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic { n: usize, condition: f64, components: usize },
    Blend { rows: usize, models: usize, noise_std: f64 },
    Blackbox { layers: Vec<usize>, samples: usize, noise_std: f64 },
    BlendCsv { path: PathBuf },
}

/// Delay shape used by the simulator (`threads = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DelayKind {
    None,
    Fixed,
    #[default]
    Uniform,
}

/// One experiment, parseable from a JSON config file; unknown keys are
/// rejected. Command-line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub problem: ProblemSpec,
    /// Iteration budget.
    pub k: usize,
    /// Worker threads; 0 selects the deterministic simulator.
    pub threads: usize,
    /// Assumed staleness bound.
    pub t: usize,
    pub seed: u64,
    /// Uniform smoothing step for zeroth-order runs (plan default otherwise).
    pub mu: Option<f64>,
    /// Step-size override; replaces the prescribed value.
    pub gamma: Option<f64>,
    /// Block size, generic variant only.
    pub y: Option<usize>,
    /// Gradient variance; estimated at the starting point when absent.
    pub sigma2: Option<f64>,
    pub snapshot_stride: usize,
    pub delay: DelayKind,
    pub output: Option<PathBuf>,
    /// Run even when the stability check fails.
    pub force: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            variant: Variant::Aszd,
            problem: ProblemSpec::Quadratic { n: 100, condition: 10.0, components: 10 },
            k: 100_000,
            threads: 0,
            t: 0,
            seed: 7,
            mu: None,
            gamma: None,
            y: None,
            sigma2: None,
            snapshot_stride: 1000,
            delay: DelayKind::Uniform,
            output: Some(PathBuf::from("asynczoo_report.json")),
            force: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(format!("config: {e}")))
    }
}

/// A constructed problem, keeping its concrete type accessible.
pub enum BuiltProblem {
    Quadratic(Quadratic),
    Blend(Blend),
    Blackbox(NoisyBlackbox),
}

impl BuiltProblem {
    pub fn as_dyn(&self) -> &dyn Problem {
        match self {
            BuiltProblem::Quadratic(p) => p,
            BuiltProblem::Blend(p) => p,
            BuiltProblem::Blackbox(p) => p,
        }
    }

    pub fn as_blend(&self) -> Option<&Blend> {
        match self {
            BuiltProblem::Blend(p) => Some(p),
            _ => None,
        }
    }
}

pub fn build_problem(spec: &ProblemSpec, seed: u64) -> Result<BuiltProblem> {
    Ok(match spec {
        ProblemSpec::Quadratic { n, condition, components } => {
            BuiltProblem::Quadratic(make_quadratic(*n, seed, *condition, *components)?)
        }
        ProblemSpec::Blend { rows, models, noise_std } => {
            BuiltProblem::Blend(make_blend(*rows, *models, seed, *noise_std)?)
        }
        ProblemSpec::Blackbox { layers, samples, noise_std } => {
            BuiltProblem::Blackbox(make_noisy_blackbox(layers, *samples, seed, *noise_std)?)
        }
        ProblemSpec::BlendCsv { path } => {
            let file = File::open(path)?;
            BuiltProblem::Blend(read_blend_csv(BufReader::new(file))?)
        }
    })
}

/// Resolves the run plan for a config: builds the starting point, estimates
/// the gradient variance when none is given, and assembles the step plan.
pub fn resolve_plan(cfg: &ExperimentConfig, problem: &dyn Problem) -> Result<(StepPlan, Vec<f64>)> {
    let x0 = problem.initial_point(cfg.seed);
    let sigma2 = match (cfg.sigma2, cfg.variant) {
        (_, Variant::Ascd) => 0.0, // forced to zero by the variant anyway
        (Some(s), _) => s,
        (None, _) => {
            let mu_est = cfg.mu.or(Some(1e-4));
            estimate_sigma2(problem, &x0, 64, cfg.seed, mu_est)?
        }
    };
    let mu = match cfg.mu {
        Some(m) => Some(MuVector::uniform(problem.dim(), m)?),
        None => None,
    };
    let meta = ProblemMeta::for_problem(problem, &x0)?;
    let plan = plan(cfg.variant, &meta, cfg.k, cfg.t, sigma2, mu, cfg.y, cfg.gamma)?;
    Ok((plan, x0))
}

fn delay_model(cfg: &ExperimentConfig) -> DelayModel {
    match (cfg.delay, cfg.t) {
        (_, 0) | (DelayKind::None, _) => DelayModel::None,
        (DelayKind::Fixed, t) => DelayModel::Fixed { tau: t },
        (DelayKind::Uniform, t) => DelayModel::Uniform { t },
    }
}

/// Executes the configured run on the simulator (`threads = 0`) or the
/// asynchronous engine.
pub fn execute(cfg: &ExperimentConfig, problem: &dyn Problem, plan: &StepPlan) -> Result<RunReport> {
    if cfg.threads == 0 {
        run_simulated(
            problem,
            plan,
            &delay_model(cfg),
            cfg.k,
            cfg.seed,
            cfg.snapshot_stride,
            cfg.force,
        )
    } else {
        run_async(
            problem,
            plan,
            cfg.threads,
            cfg.k,
            cfg.seed,
            cfg.snapshot_stride,
            cfg.force,
        )
    }
}

/// Full report JSON: the run report plus the resolved config and build id.
pub fn report_json(report: &RunReport, cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let mut value =
        serde_json::to_value(report).map_err(|e| Error::Parse(format!("report: {e}")))?;
    let map = value.as_object_mut().expect("report serializes to an object");
    map.insert(
        "config".into(),
        serde_json::to_value(cfg).map_err(|e| Error::Parse(format!("config: {e}")))?,
    );
    map.insert("build_id".into(), serde_json::Value::String(build_id()));
    Ok(value)
}

fn write_outputs(cfg: &ExperimentConfig, report: &RunReport, out: &mut impl Write) -> Result<()> {
    let Some(path) = &cfg.output else { return Ok(()) };
    let json = report_json(report, cfg)?;
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, &json).map_err(|e| Error::Parse(format!("{e}")))?;
    file.write_all(b"\n")?;
    let stem = path.with_extension("");
    let stem = stem.to_string_lossy();
    let obj_path = format!("{stem}_objective.csv");
    write_trace_csv(BufWriter::new(File::create(&obj_path)?), &report.objective)?;
    let grad_path = format!("{stem}_grad_norm_sq.csv");
    write_trace_csv(BufWriter::new(File::create(&grad_path)?), &report.grad_norm_sq)?;
    writeln!(out, "wrote {} , {obj_path} , {grad_path}", path.display())?;
    Ok(())
}

fn print_summary(report: &RunReport, out: &mut impl Write) -> Result<()> {
    let p = &report.step_plan;
    writeln!(out, "variant            {}", p.variant)?;
    writeln!(out, "gamma              {:.6e}", p.gamma)?;
    writeln!(out, "t_max              {:.3}", p.t_max)?;
    writeln!(out, "theta_ok           {}", p.theta_ok)?;
    writeln!(out, "rate_bound         {:.6e}", p.rate_bound)?;
    writeln!(out, "k_done             {}", report.k_done)?;
    writeln!(out, "observed_staleness {}", report.observed_staleness_max)?;
    if report.threads > 0 {
        writeln!(out, "threads            {}", report.threads)?;
        writeln!(out, "wall_time_s        {:.4}", report.wall_time_s)?;
    }
    if let Some(f) = report.final_objective() {
        writeln!(out, "final objective    {:.6e}", f)?;
    }
    writeln!(out, "ergodic |grad|^2   {:.6e}", ergodic_grad_norm(report)?)?;
    Ok(())
}

fn print_warnings(plan: &StepPlan, out: &mut impl Write) -> Result<()> {
    for w in &plan.warnings {
        writeln!(out, "warning: {w}")?;
    }
    Ok(())
}

/// `run`: one configured experiment end to end.
pub fn cmd_run(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<()> {
    let built = build_problem(&cfg.problem, cfg.seed)?;
    let problem = built.as_dyn();
    let (plan, _x0) = resolve_plan(cfg, problem)?;
    print_warnings(&plan, out)?;
    if !plan.theta_ok && !cfg.force {
        return Err(Error::Prerequisite(format!(
            "step size {:.3e} fails the stability condition for T = {}; \
             pass --force to run anyway",
            plan.gamma, cfg.t
        )));
    }
    if report_staleness_flag(cfg) {
        writeln!(out, "note: staleness is measured, not enforced, in async mode")?;
    }
    let report = execute(cfg, problem, &plan)?;
    if report.observed_staleness_max > plan.cfg.t {
        writeln!(
            out,
            "warning: observed staleness {} exceeded the assumed bound {}",
            report.observed_staleness_max, plan.cfg.t
        )?;
    }
    print_summary(&report, out)?;
    write_outputs(cfg, &report, out)?;
    Ok(())
}

fn report_staleness_flag(cfg: &ExperimentConfig) -> bool {
    cfg.threads > 0
}

/// `bench-speedup`: fixed-iteration async runs across worker counts.
pub fn cmd_bench_speedup(
    cfg: &ExperimentConfig,
    thread_list: &[usize],
    out: &mut impl Write,
) -> Result<SpeedupTable> {
    if !thread_list.contains(&1) {
        return Err(Error::validation("thread list must include the single-worker baseline"));
    }
    let built = build_problem(&cfg.problem, cfg.seed)?;
    let problem = built.as_dyn();
    let (plan, _x0) = resolve_plan(cfg, problem)?;
    print_warnings(&plan, out)?;
    if !plan.theta_ok && !cfg.force {
        return Err(Error::Prerequisite(
            "step size fails the stability condition; pass --force to bench anyway".into(),
        ));
    }
    let mut reports = Vec::new();
    for &threads in thread_list {
        let report = run_async(
            problem,
            &plan,
            threads,
            cfg.k,
            cfg.seed,
            cfg.snapshot_stride,
            cfg.force,
        )?;
        writeln!(
            out,
            "threads {threads:>3}: k_done {} wall {:.4}s",
            report.k_done, report.wall_time_s
        )?;
        reports.push(report);
    }
    let refs: Vec<&RunReport> = reports.iter().collect();
    let table = speedup(&refs, SpeedupMode::FixedK, None)?;
    write!(out, "{}", table.to_text())?;
    if let Some(path) = &cfg.output {
        let stem = path.with_extension("");
        let csv_path = format!("{}_speedup.csv", stem.to_string_lossy());
        table.write_csv(BufWriter::new(File::create(&csv_path)?))?;
        writeln!(out, "wrote {csv_path}")?;
    }
    Ok(table)
}

/// What the blending demo measured.
#[derive(Debug, Clone, Serialize)]
pub struct BlendDemoResult {
    /// Held-out RMSE of the all-zero blend (the starting point).
    pub baseline_rmse: f64,
    pub final_train_rmse: f64,
    pub final_heldout_rmse: f64,
    /// `(k, held-out RMSE)` along the run.
    pub heldout_trace: Vec<(usize, f64)>,
    pub report: RunReport,
}

/// Demo step size: a few multiples of `1/K`, mirroring the practice of
/// tuning the constant step on the single-worker run. The prescribed
/// worst-case step is far too conservative to reach the noise floor within
/// the demo budget.
pub fn blend_demo_gamma(k: usize) -> f64 {
    2.0 / k as f64
}

/// `blend-demo`: zeroth-order blending from the zero vector, reporting
/// held-out RMSE against the noise floor.
pub fn blend_demo(cfg: &ExperimentConfig) -> Result<BlendDemoResult> {
    let built = build_problem(&cfg.problem, cfg.seed)?;
    let Some(blend) = built.as_blend() else {
        return Err(Error::validation("blend-demo needs a blend problem"));
    };
    if cfg.variant != Variant::Aszd {
        return Err(Error::validation("blend-demo runs the zeroth-order variant"));
    }
    let mut demo_cfg = cfg.clone();
    if demo_cfg.gamma.is_none() {
        demo_cfg.gamma = Some(blend_demo_gamma(cfg.k));
    }
    let problem = built.as_dyn();
    let (plan, x0) = resolve_plan(&demo_cfg, problem)?;
    let baseline_rmse = blend.heldout_rmse(&x0)?;
    let report = execute(&demo_cfg, problem, &plan)?;
    let mut heldout_trace = Vec::with_capacity(report.snapshots.len());
    for (k, x) in &report.snapshots {
        heldout_trace.push((*k, blend.heldout_rmse(x)?));
    }
    Ok(BlendDemoResult {
        baseline_rmse,
        final_train_rmse: blend.train_rmse(&report.final_x)?,
        final_heldout_rmse: blend.heldout_rmse(&report.final_x)?,
        heldout_trace,
        report,
    })
}

pub fn cmd_blend_demo(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<()> {
    let result = blend_demo(cfg)?;
    print_warnings(&result.report.step_plan, out)?;
    writeln!(out, "baseline heldout RMSE {:.6}", result.baseline_rmse)?;
    writeln!(out, "final train RMSE      {:.6}", result.final_train_rmse)?;
    writeln!(out, "final heldout RMSE    {:.6}", result.final_heldout_rmse)?;
    print_summary(&result.report, out)?;
    if let Some(path) = &cfg.output {
        let stem = path.with_extension("");
        let rmse_path = format!("{}_heldout_rmse.csv", stem.to_string_lossy());
        write_trace_csv(BufWriter::new(File::create(&rmse_path)?), &result.heldout_trace)?;
        writeln!(out, "wrote {rmse_path}")?;
    }
    write_outputs(cfg, &result.report, out)?;
    Ok(())
}

/// One verification check's outcome.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// `verify-bounds`: numeric spot checks of the theory on sampled functions
/// and a reference run. Returns one entry per check.
pub fn verify_bounds(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let seed = cfg.seed;

    // Smoothing bias bounds on sampled probe functions.
    let mut value_worst = f64::NEG_INFINITY;
    let mut grad_worst = f64::NEG_INFINITY;
    let mut mean_sq_worst = f64::NEG_INFINITY;
    let mut rng = stream_rng(seed, 0xb0);
    for probe_id in 0..10u64 {
        let probe = make_trig_probe(4, seed.wrapping_add(probe_id))?;
        let lip = probe.lipschitz().clone();
        for _ in 0..5 {
            let x = crate::rng::normal_vec(&mut rng, 4);
            for &mu in &[1e-1, 1e-2, 1e-3] {
                let mut mean_sq = 0.0;
                for i in 0..4 {
                    let li = lip.l_coord()[i];
                    let smoothed = smoothed_value(&probe, &x, i, mu, 129)?;
                    let plain = probe.eval_mean(&x)?;
                    value_worst = value_worst.max((smoothed - plain).abs() - li * mu * mu / 2.0);
                    let sg = smoothed_grad_coord(&probe, &x, 0, i, mu)?;
                    let g = probe.grad(&x, 0)?[i];
                    grad_worst = grad_worst.max((sg - g).abs() - li * mu / 2.0);
                    mean_sq += (sg - g) * (sg - g);
                }
                mean_sq /= 4.0;
                let mu_vec = vec![mu; 4];
                let omega = crate::zeroth_order::omega(&lip, &mu_vec)?;
                mean_sq_worst = mean_sq_worst.max(mean_sq - omega / 4.0);
            }
        }
    }
    checks.push(Check {
        name: "smoothing value bias within L_i mu^2 / 2",
        pass: value_worst <= 1e-9,
        detail: format!("worst excess {value_worst:.3e}"),
    });
    checks.push(Check {
        name: "smoothing gradient bias within L_i mu / 2",
        pass: grad_worst <= 1e-9,
        detail: format!("worst excess {grad_worst:.3e}"),
    });
    checks.push(Check {
        name: "coordinate-averaged squared bias within omega / 4",
        pass: mean_sq_worst <= 1e-9,
        detail: format!("worst excess {mean_sq_worst:.3e}"),
    });

    // Estimator exactness on a quadratic.
    let quad = make_quadratic(6, seed, 4.0, 3)?;
    let mut exact_worst = 0.0f64;
    let mut rng = stream_rng(seed, 0xb1);
    for _ in 0..50 {
        let x = crate::rng::normal_vec(&mut rng, 6);
        let s = crate::zeroth_order::sample_coords(&mut rng, 6, 2);
        let mu = MuVector::uniform(6, 0.25)?;
        let est = estimate_block(&quad, &x, 1, &s, &mu)?;
        let g = quad.grad(&x, 1)?;
        for (i, v) in est.iter() {
            let want = 6.0 / 2.0 * g[i];
            exact_worst = exact_worst.max((v - want).abs() / want.abs().max(1.0));
        }
    }
    checks.push(Check {
        name: "central-difference estimator exact on quadratics",
        pass: exact_worst <= 1e-10,
        detail: format!("worst relative deviation {exact_worst:.3e}"),
    });

    // Stability condition at the prescribed step over random configurations.
    let mut rng = stream_rng(seed, 0xb2);
    let mut stable_fail = 0usize;
    for _ in 0..200 {
        let rc = RunConfig::sample(&mut rng);
        if !check_theta(&rc, step_size(&rc)?)? {
            stable_fail += 1;
        }
    }
    checks.push(Check {
        name: "prescribed step passes the stability condition",
        pass: stable_fail == 0,
        detail: format!("{stable_fail} of 200 sampled configurations failed"),
    });

    // The configured plan itself (honors a gamma override).
    let built = build_problem(&cfg.problem, cfg.seed)?;
    let (cfg_plan, _) = resolve_plan(cfg, built.as_dyn())?;
    checks.push(Check {
        name: "configured run passes the stability condition",
        pass: cfg_plan.theta_ok,
        detail: format!("gamma {:.3e}, T {}", cfg_plan.gamma, cfg.t),
    });
    for w in &cfg_plan.warnings {
        checks.push(Check { name: "plan warning", pass: true, detail: w.clone() });
    }

    // Empirical ergodic gradient mean against the predicted bound.
    let quad = make_quadratic(50, seed, 10.0, 8)?;
    let demo = ExperimentConfig {
        variant: Variant::Ascd,
        problem: ProblemSpec::Quadratic { n: 50, condition: 10.0, components: 8 },
        k: 20_000,
        threads: 0,
        t: 0,
        seed,
        snapshot_stride: 50,
        output: None,
        ..ExperimentConfig::default()
    };
    let (plan, _) = resolve_plan(&demo, &quad)?;
    let report = execute(&demo, &quad, &plan)?;
    let measured = ergodic_grad_norm(&report)?;
    checks.push(Check {
        name: "measured ergodic gradient mean within the rate bound",
        pass: measured <= plan.rate_bound,
        detail: format!("measured {measured:.4e} vs bound {:.4e}", plan.rate_bound),
    });

    Ok(checks)
}

pub fn cmd_verify_bounds(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<i32> {
    let checks = verify_bounds(cfg)?;
    let mut failures = 0;
    for c in &checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        writeln!(out, "[{tag}] {} — {}", c.name, c.detail)?;
        if !c.pass {
            failures += 1;
        }
    }
    Ok(if failures == 0 { EXIT_OK } else { EXIT_PROPERTY_FAILURE })
}
