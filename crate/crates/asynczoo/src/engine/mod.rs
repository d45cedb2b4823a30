//! Execution engines for the unified asynchronous update
//! `x_{k+1} = x_k - gamma G_{S_k}(xhat_k; xi_k)`.
//!
//! Two engines share one gradient dispatch:
//!
//! * [`run_simulated`] — a single-threaded simulator in which the read
//!   `xhat_k` is reconstructed from an explicit delay model, so staleness
//!   effects are exactly reproducible.
//! * [`run_async`] — real multi-threaded execution against a lock-free
//!   shared [`ParamStore`], for wall-clock speedup measurements. Staleness is
//!   measured, not enforced.
//!
//! Gradient-norm and objective traces are computed offline from snapshots so
//! the timed region stays free of instrumentation work.

mod delay;
mod store;

pub use delay::DelayModel;
pub use store::{AtomicF64, ParamStore, ReadMode};

use crate::error::{Error, Result};
use crate::objective::Problem;
use crate::rng::{self, stream_rng};
use crate::stepsize::{StepPlan, Variant};
use crate::zeroth_order::{estimate_block, sample_coords, SparseGradEstimate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Instant;

/// Hard cap on worker threads, overridable via `ASYNCZOO_THREAD_CAP`.
pub fn thread_cap() -> usize {
    std::env::var("ASYNCZOO_THREAD_CAP")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(256)
}

/// Draws the step's component index and coordinate set: the component uniform
/// over all components, the set uniform over size-`y` subsets. Consecutive
/// calls on one stream are independent draws.
pub fn sample_step(
    rng: &mut ChaCha8Rng,
    n: usize,
    y: usize,
    n_components: usize,
) -> (usize, Vec<usize>) {
    let xi = rng.gen_range(0..n_components);
    let s = sample_coords(rng, n, y);
    (xi, s)
}

/// Everything a finished run reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: Variant,
    /// Worker count; 0 marks the deterministic simulator.
    pub threads: usize,
    pub k_done: usize,
    /// Wall time around the worker region; 0 for the simulator, which is not
    /// a timing tool.
    pub wall_time_s: f64,
    pub observed_staleness_max: usize,
    pub step_plan: StepPlan,
    /// `(k, ||grad f(x_k)||^2)` at the snapshot points.
    pub grad_norm_sq: Vec<(usize, f64)>,
    /// `(k, f(x_k))` at the snapshot points.
    pub objective: Vec<(usize, f64)>,
    pub final_x: Vec<f64>,
    /// Raw iterate snapshots `(k, x_k)`; kept in memory, not serialized.
    #[serde(skip)]
    pub snapshots: Vec<(usize, Vec<f64>)>,
}

impl RunReport {
    /// Final mean objective value.
    pub fn final_objective(&self) -> Option<f64> {
        self.objective.last().map(|&(_, f)| f)
    }
}

/// Writes a `(k, value)` trace as CSV with header `k,value`.
pub fn write_trace_csv(mut out: impl Write, trace: &[(usize, f64)]) -> Result<()> {
    out.write_all(b"k,value\n")?;
    for (k, v) in trace {
        out.write_all(format!("{k},{v}\n").as_bytes())?;
    }
    Ok(())
}

/// Step-by-step record of a simulated run, for verification.
#[derive(Debug, Clone, Default)]
pub struct SimTrace {
    /// `x_k` for every `k = 0..=K`.
    pub iterates: Vec<Vec<f64>>,
    /// The read the engine used at each step.
    pub xhats: Vec<Vec<f64>>,
    /// The missing set at each step.
    pub missing_sets: Vec<Vec<usize>>,
    /// The sparse delta `x_{k+1} - x_k` applied at each step.
    pub deltas: Vec<(Vec<usize>, Vec<f64>)>,
}

fn check_plan(problem: &dyn Problem, plan: &StepPlan, force: bool) -> Result<()> {
    if plan.cfg.n != problem.dim() {
        return Err(Error::validation(format!(
            "plan is for dimension {}, problem has {}",
            plan.cfg.n,
            problem.dim()
        )));
    }
    if !plan.theta_ok && !force {
        return Err(Error::Prerequisite(
            "step size fails the stability condition; rerun with force to override".into(),
        ));
    }
    let needs_grad = matches!(
        plan.variant,
        Variant::Ascd | Variant::AsgdConsistent | Variant::AsgdInconsistent
    ) || (plan.variant == Variant::Generic && plan.mu.is_none());
    if needs_grad && !problem.has_gradient() {
        return Err(Error::UnsupportedOracle(format!(
            "variant {} needs gradients, which this problem does not expose",
            plan.variant
        )));
    }
    if matches!(plan.variant, Variant::Aszd) && plan.mu.is_none() {
        return Err(Error::validation("zeroth-order plan carries no smoothing steps"));
    }
    Ok(())
}

/// One gradient estimate at the (possibly stale) read `xhat`.
fn sparse_gradient(
    problem: &dyn Problem,
    plan: &StepPlan,
    xhat: &[f64],
    xi: usize,
    s: &[usize],
) -> Result<SparseGradEstimate> {
    let n = problem.dim() as f64;
    let y = s.len() as f64;
    match (&plan.mu, plan.variant) {
        (Some(mu), _) => estimate_block(problem, xhat, xi, s, mu),
        (None, Variant::Ascd) => {
            let g = problem.grad_mean(xhat)?;
            let values = s.iter().map(|&i| n / y * g[i]).collect();
            SparseGradEstimate::new(s.to_vec(), values)
        }
        (None, _) => {
            let g = problem.grad(xhat, xi)?;
            let values = s.iter().map(|&i| n / y * g[i]).collect();
            SparseGradEstimate::new(s.to_vec(), values)
        }
    }
}

fn build_traces(
    problem: &dyn Problem,
    snapshots: &[(usize, Vec<f64>)],
) -> Result<(Vec<(usize, f64)>, Vec<(usize, f64)>)> {
    let mut objective = Vec::with_capacity(snapshots.len());
    let mut grad_norm_sq = Vec::with_capacity(snapshots.len());
    for (k, x) in snapshots {
        objective.push((*k, problem.eval_mean(x)?));
        let g = problem.grad_mean(x)?;
        grad_norm_sq.push((*k, g.iter().map(|v| v * v).sum()));
    }
    Ok((objective, grad_norm_sq))
}

/// Runs the update rule in a single thread, reconstructing each read from the
/// delay model: `xhat_k = x_k - sum_{j in J(k)} (x_{j+1} - x_j)`, with the
/// recent update deltas held in a ring buffer. Bitwise deterministic in all
/// inputs.
pub fn run_simulated(
    problem: &dyn Problem,
    plan: &StepPlan,
    delay: &DelayModel,
    k_iters: usize,
    seed: u64,
    snapshot_stride: usize,
    force: bool,
) -> Result<RunReport> {
    run_simulated_inner(problem, plan, delay, k_iters, seed, snapshot_stride, force, None)
}

/// [`run_simulated`] plus a full per-step record; intended for verification
/// at small `K`.
pub fn run_simulated_traced(
    problem: &dyn Problem,
    plan: &StepPlan,
    delay: &DelayModel,
    k_iters: usize,
    seed: u64,
    snapshot_stride: usize,
    force: bool,
) -> Result<(RunReport, SimTrace)> {
    let mut trace = SimTrace::default();
    let report = run_simulated_inner(
        problem,
        plan,
        delay,
        k_iters,
        seed,
        snapshot_stride,
        force,
        Some(&mut trace),
    )?;
    Ok((report, trace))
}

#[allow(clippy::too_many_arguments)]
fn run_simulated_inner(
    problem: &dyn Problem,
    plan: &StepPlan,
    delay: &DelayModel,
    k_iters: usize,
    seed: u64,
    snapshot_stride: usize,
    force: bool,
    mut capture: Option<&mut SimTrace>,
) -> Result<RunReport> {
    check_plan(problem, plan, force)?;
    if delay.max_age() > plan.cfg.t {
        return Err(Error::validation(format!(
            "delay model allows age {} but the plan assumes T = {}",
            delay.max_age(),
            plan.cfg.t
        )));
    }
    let n = problem.dim();
    let t_bound = plan.cfg.t;
    let mut x = problem.initial_point(seed);
    let mut rng_sample = stream_rng(seed, rng::STREAM_SAMPLE);
    let mut rng_delay = stream_rng(seed, rng::STREAM_DELAY);

    // Ring of the last `T` applied deltas, sparse: (step, indices, values).
    let cap = t_bound.max(1);
    let mut ring: Vec<Option<(usize, Vec<usize>, Vec<f64>)>> = (0..cap).map(|_| None).collect();

    let mut snapshots: Vec<(usize, Vec<f64>)> = vec![(0, x.clone())];
    let mut missing = Vec::new();
    let mut xhat = vec![0.0; n];
    let mut staleness_max = 0usize;

    if let Some(trace) = capture.as_deref_mut() {
        trace.iterates.push(x.clone());
    }

    for k in 0..k_iters {
        if snapshot_stride > 0 && k > 0 && k % snapshot_stride == 0 {
            snapshots.push((k, x.clone()));
        }
        delay.missing_set(k, &mut rng_delay, &mut missing)?;
        debug_assert!(missing.iter().all(|&j| j < k && k - j <= t_bound));
        if let Some(&oldest) = missing.first() {
            staleness_max = staleness_max.max(k - oldest);
        }
        xhat.copy_from_slice(&x);
        for &j in &missing {
            let slot = ring[j % cap].as_ref().expect("missed update within ring capacity");
            debug_assert_eq!(slot.0, j);
            for (idx, dv) in slot.1.iter().zip(&slot.2) {
                xhat[*idx] -= dv;
            }
        }
        let (xi, s) = sample_step(&mut rng_sample, n, plan.cfg.y, problem.num_components());
        let estimate = sparse_gradient(problem, plan, &xhat, xi, &s)?;
        let mut delta_vals = Vec::with_capacity(estimate.len());
        for (idx, v) in estimate.iter() {
            let d = -plan.gamma * v;
            x[idx] += d;
            delta_vals.push(d);
        }
        if let Some(trace) = capture.as_deref_mut() {
            trace.xhats.push(xhat.clone());
            trace.missing_sets.push(missing.clone());
            trace.iterates.push(x.clone());
            trace.deltas.push((estimate.indices().to_vec(), delta_vals.clone()));
        }
        ring[k % cap] = Some((k, estimate.indices().to_vec(), delta_vals));
    }

    if snapshots.last().map(|(k, _)| *k) != Some(k_iters) {
        snapshots.push((k_iters, x.clone()));
    }
    let (objective, grad_norm_sq) = build_traces(problem, &snapshots)?;
    Ok(RunReport {
        variant: plan.variant,
        threads: 0,
        k_done: k_iters,
        wall_time_s: 0.0,
        observed_staleness_max: staleness_max,
        step_plan: plan.clone(),
        grad_norm_sq,
        objective,
        final_x: x,
        snapshots,
    })
}

/// Runs the update rule on `threads` workers sharing one lock-free store.
///
/// Each worker loops: read `xhat` (mode set by the variant), draw its own
/// `(xi, S)` from a per-worker stream split off the master seed, compute the
/// estimate, subtract it coordinate-atomically, and stop once the global
/// counter reaches `k_target` (at most `threads - 1` overshoot updates are
/// kept). Staleness is the counter distance between read start and the
/// worker's own commit, maximized over all steps.
pub fn run_async(
    problem: &dyn Problem,
    plan: &StepPlan,
    threads: usize,
    k_target: usize,
    seed: u64,
    snapshot_stride: usize,
    force: bool,
) -> Result<RunReport> {
    check_plan(problem, plan, force)?;
    if threads < 1 {
        return Err(Error::validation("need at least one worker"));
    }
    let cap = thread_cap();
    if threads > cap {
        return Err(Error::validation(format!(
            "{threads} workers exceed the cap {cap} (override with ASYNCZOO_THREAD_CAP)"
        )));
    }
    if k_target < 1 {
        return Err(Error::validation("iteration target must be at least 1"));
    }
    let n = problem.dim();
    let mode = match plan.variant {
        Variant::AsgdConsistent => ReadMode::Consistent,
        _ => ReadMode::Inconsistent,
    };
    let x0 = problem.initial_point(seed);
    let store = ParamStore::new(&x0, mode);
    let snapshots: Mutex<Vec<(usize, Vec<f64>)>> = Mutex::new(vec![(0, x0)]);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let stop = AtomicBool::new(false);

    let started = Instant::now();
    let staleness_max = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(threads);
        for w in 0..threads {
            let store = &store;
            let snapshots = &snapshots;
            let failure = &failure;
            let stop = &stop;
            handles.push(scope.spawn(move || {
                let mut rng = stream_rng(seed, rng::STREAM_WORKER_BASE + w as u64);
                let mut xhat = vec![0.0; n];
                let mut local_stale = 0u64;
                while !stop.load(Ordering::Relaxed) {
                    let read_start = store.counter();
                    match mode {
                        ReadMode::Consistent => {
                            store.read_consistent_into(&mut xhat);
                        }
                        ReadMode::Inconsistent => store.read_inconsistent_into(&mut xhat),
                    }
                    let (xi, s) = sample_step(&mut rng, n, plan.cfg.y, problem.num_components());
                    let step = sparse_gradient(problem, plan, &xhat, xi, &s)
                        .and_then(|estimate| store.apply_update(&estimate, plan.gamma));
                    let index = match step {
                        Ok(index) => index,
                        Err(e) => {
                            *failure.lock().unwrap() = Some(e);
                            stop.store(true, Ordering::Relaxed);
                            break;
                        }
                    };
                    local_stale = local_stale.max(index - 1 - read_start);
                    if snapshot_stride > 0
                        && index as usize % snapshot_stride == 0
                        && (index as usize) < k_target
                    {
                        let copy = store.snapshot();
                        snapshots.lock().unwrap().push((index as usize, copy));
                    }
                    if index as usize >= k_target {
                        stop.store(true, Ordering::Relaxed);
                        break;
                    }
                }
                local_stale
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .max()
            .unwrap_or(0)
    });
    let wall_time_s = started.elapsed().as_secs_f64();

    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let k_done = store.counter() as usize;
    let final_x = store.read_inconsistent(); // store is quiescent now
    let mut snapshots = snapshots.into_inner().unwrap();
    snapshots.sort_by_key(|(k, _)| *k);
    snapshots.dedup_by_key(|(k, _)| *k);
    if snapshots.last().map(|(k, _)| *k) != Some(k_done) {
        snapshots.push((k_done, final_x.clone()));
    }
    let (objective, grad_norm_sq) = build_traces(problem, &snapshots)?;
    Ok(RunReport {
        variant: plan.variant,
        threads,
        k_done,
        wall_time_s,
        observed_staleness_max: staleness_max as usize,
        step_plan: plan.clone(),
        grad_norm_sq,
        objective,
        final_x,
        snapshots,
    })
}
