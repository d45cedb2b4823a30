//! Temporary calibration harness; not part of the shipped suite.

use asynczoo::cli::{blend_demo, ExperimentConfig, ProblemSpec};
use asynczoo::stepsize::Variant;

#[test]
#[ignore]
fn calibrate_blend_demo_seeds() {
    for seed in 0..12u64 {
        let cfg = ExperimentConfig {
            variant: Variant::Aszd,
            problem: ProblemSpec::Blend { rows: 4000, models: 50, noise_std: 0.5 },
            k: 200_000,
            threads: 0,
            t: 0,
            seed,
            snapshot_stride: 100,
            output: None,
            ..ExperimentConfig::default()
        };
        let cfg = ExperimentConfig { snapshot_stride: 25, ..cfg };
        let started = std::time::Instant::now();
        let result = blend_demo(&cfg).unwrap();
        let trace = &result.heldout_trace;
        // Point values at 100-iteration boundaries.
        let early: Vec<f64> = trace
            .iter()
            .filter(|(k, _)| *k <= 5_000 && k % 100 == 0)
            .map(|&(_, v)| v)
            .collect();
        let point_violations = early.windows(2).filter(|w| w[1] > w[0]).count();
        // Window means over [100i, 100(i+1)) from stride-25 samples.
        let mut means = Vec::new();
        for w in 0..50 {
            let lo = w * 100;
            let hi = lo + 100;
            let vals: Vec<f64> = trace
                .iter()
                .filter(|(k, _)| *k >= lo && *k < hi)
                .map(|&(_, v)| v)
                .collect();
            means.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
        let mean_violations = means.windows(2).filter(|w| w[1] > w[0]).count();
        println!(
            "seed {seed}: final {:.4} | point viol {point_violations} | window-mean viol {mean_violations} | {:?}",
            result.final_heldout_rmse,
            started.elapsed()
        );
    }
}
