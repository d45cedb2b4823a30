//! Temporary calibration harness; not part of the shipped suite.

use asynczoo::engine::{run_async, run_simulated, DelayModel};
use asynczoo::metrics::{ergodic_grad_norm, speedup, SpeedupMode};
use asynczoo::objective::{estimate_sigma2, make_noisy_blackbox, make_quadratic, Problem};
use asynczoo::stepsize::{plan, ProblemMeta, Variant};

#[test]
#[ignore]
fn calibrate_convergence_bound() {
    let problem = make_quadratic(100, 4, 10.0, 10).unwrap();
    let x0 = problem.initial_point(4);
    let meta = ProblemMeta::for_problem(&problem, &x0).unwrap();
    let mut measured = Vec::new();
    for k in [50_000usize, 100_000] {
        let t0 = std::time::Instant::now();
        let p = plan(Variant::Ascd, &meta, k, 0, 0.0, None, None, None).unwrap();
        let report = run_simulated(&problem, &p, &DelayModel::None, k, 4, 25, false).unwrap();
        let m = ergodic_grad_norm(&report).unwrap();
        println!(
            "K={k}: measured {m:.4e} bound {:.4e} ratio {:.3} gamma {:.3e} | {:?}",
            p.rate_bound,
            m / p.rate_bound,
            p.gamma,
            t0.elapsed()
        );
        measured.push(m);
    }
    println!("halving ratio: {:.4}", measured[1] / measured[0]);
}

#[test]
#[ignore]
fn calibrate_staleness_robustness() {
    let problem = make_quadratic(100, 4, 10.0, 10).unwrap();
    let x0 = problem.initial_point(4);
    let meta = ProblemMeta::for_problem(&problem, &x0).unwrap();
    let mut results = Vec::new();
    for t in [0usize, 4, 16] {
        let p = plan(Variant::Ascd, &meta, 50_000, t, 0.0, None, None, None).unwrap();
        assert!(t as f64 <= p.t_max, "T={t} above ceiling {}", p.t_max);
        let delay = DelayModel::Fixed { tau: t };
        let report = run_simulated(&problem, &p, &delay, 50_000, 4, 25, false).unwrap();
        let m = ergodic_grad_norm(&report).unwrap();
        println!("T={t}: ergodic {m:.4e} gamma {:.4e} t_max {:.1}", p.gamma, p.t_max);
        results.push(m);
    }
    println!("degradation T=16 vs T=0: {:.3}", results[2] / results[0]);
}

#[test]
#[ignore]
fn calibrate_speedup() {
    let cores = std::thread::available_parallelism().map(|c| c.get()).unwrap_or(1);
    println!("available parallelism: {cores}");
    let problem = make_noisy_blackbox(&[16, 12, 8], 256, 4, 0.1).unwrap();
    println!("dim: {}", problem.dim());
    let x0 = problem.initial_point(4);
    let sigma2 = estimate_sigma2(&problem, &x0, 64, 4, Some(1e-4)).unwrap();
    let meta = ProblemMeta::for_problem(&problem, &x0).unwrap();
    let k = 300_000;
    let p = plan(Variant::Aszd, &meta, k, 4, sigma2, None, None, None).unwrap();
    println!("sigma2 {sigma2:.3e} gamma {:.3e} theta_ok {}", p.gamma, p.theta_ok);
    // Warmup.
    run_async(&problem, &p, cores.min(4), 20_000, 4, 0, false).unwrap();
    let mut reports = Vec::new();
    for threads in [1usize, 2, 4] {
        let r = run_async(&problem, &p, threads, k, 4, 0, false).unwrap();
        println!("threads {threads}: wall {:.4}s k_done {}", r.wall_time_s, r.k_done);
        reports.push(r);
    }
    let refs: Vec<_> = reports.iter().collect();
    let table = speedup(&refs, SpeedupMode::FixedK, None).unwrap();
    println!("{}", table.to_text());
}
