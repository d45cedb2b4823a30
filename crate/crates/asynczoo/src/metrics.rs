//! Reported quantities: ergodic gradient norms, speedup tables, RMSE.

use crate::engine::RunReport;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Stride-weighted mean of `||grad f(x_k)||^2` over a report's snapshot
/// trace: the trapezoid average of the recorded values over the covered
/// iteration range (a single snapshot yields its own value). Approximates the
/// ergodic mean `sum_{k<K} ||grad f(x_k)||^2 / K`.
pub fn ergodic_grad_norm(report: &RunReport) -> Result<f64> {
    trace_mean(&report.grad_norm_sq)
}

/// Trapezoid average of a `(k, value)` trace.
pub fn trace_mean(trace: &[(usize, f64)]) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::validation("trace has no entries"));
    }
    if trace.len() == 1 {
        return Ok(trace[0].1);
    }
    if trace.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::validation("trace indices must be strictly increasing"));
    }
    let span = (trace.last().unwrap().0 - trace[0].0) as f64;
    let mut acc = 0.0;
    for pair in trace.windows(2) {
        let ((k0, v0), (k1, v1)) = (pair[0], pair[1]);
        acc += 0.5 * (v0 + v1) * (k1 - k0) as f64;
    }
    Ok(acc / span)
}

/// Root mean squared error between predictions and ground truth.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::validation(format!(
            "length mismatch: {} predictions vs {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::validation("need at least one value"));
    }
    let acc: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((acc / pred.len() as f64).sqrt())
}

/// How speedup is accounted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedupMode {
    /// All runs execute the same iteration count; computational-complexity
    /// speedup is the worker count by construction, running-time speedup is
    /// the wall-time ratio.
    FixedK,
    /// Count iterations and time until the objective first reaches a target.
    ToTarget,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub threads: usize,
    pub k_done: usize,
    pub wall_time_s: f64,
    /// Computational-complexity speedup; `None` when the target was missed.
    pub ccs: Option<f64>,
    /// Running-time speedup; `None` when the target was missed.
    pub rts: Option<f64>,
}

/// Speedup across worker counts, normalized to the single-worker row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedupTable {
    pub mode: SpeedupMode,
    pub rows: Vec<SpeedupRow>,
}

struct Measured {
    threads: usize,
    k: usize,
    time: f64,
    reached: bool,
}

/// Builds the speedup table from one report per worker count. Exactly one
/// report must have `threads == 1`; it is the baseline and its row is pinned
/// to `ccs = rts = 1`.
pub fn speedup(
    reports: &[&RunReport],
    mode: SpeedupMode,
    target_f: Option<f64>,
) -> Result<SpeedupTable> {
    if reports.iter().filter(|r| r.threads == 1).count() != 1 {
        return Err(Error::validation("need exactly one single-worker baseline report"));
    }
    let measured: Vec<Measured> = match mode {
        SpeedupMode::FixedK => reports
            .iter()
            .map(|r| Measured { threads: r.threads, k: r.k_done, time: r.wall_time_s, reached: true })
            .collect(),
        SpeedupMode::ToTarget => {
            let target = target_f
                .ok_or_else(|| Error::validation("to-target mode needs a target objective"))?;
            reports
                .iter()
                .map(|r| {
                    let hit = r.objective.iter().find(|(_, f)| *f <= target);
                    match hit {
                        Some(&(k, _)) => {
                            // Time attributed pro-rata by iteration count.
                            let frac = if r.k_done > 0 { k as f64 / r.k_done as f64 } else { 0.0 };
                            Measured {
                                threads: r.threads,
                                k: k.max(1),
                                time: r.wall_time_s * frac,
                                reached: true,
                            }
                        }
                        None => Measured {
                            threads: r.threads,
                            k: r.k_done,
                            time: r.wall_time_s,
                            reached: false,
                        },
                    }
                })
                .collect()
        }
    };
    let base = measured.iter().find(|m| m.threads == 1).unwrap();
    if !base.reached {
        return Err(Error::validation("baseline run never reached the target objective"));
    }
    let (base_k, base_time) = (base.k, base.time);
    let rows = measured
        .iter()
        .map(|m| {
            let (ccs, rts) = if !m.reached {
                (None, None)
            } else if m.threads == 1 {
                (Some(1.0), Some(1.0))
            } else {
                let ccs = match mode {
                    SpeedupMode::FixedK => m.threads as f64,
                    SpeedupMode::ToTarget => base_k as f64 / m.k as f64 * m.threads as f64,
                };
                let rts = if m.time > 0.0 { base_time / m.time } else { f64::INFINITY };
                (Some(ccs), Some(rts))
            };
            SpeedupRow { threads: m.threads, k_done: m.k, wall_time_s: m.time, ccs, rts }
        })
        .collect();
    Ok(SpeedupTable { mode, rows })
}

impl SpeedupTable {
    /// Aligned text rendering: a `thr-#` header row, then CCS and RTS rows.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.2}"),
            None => "unreachable".to_string(),
        };
        let mut header = vec!["thr-#".to_string()];
        let mut ccs = vec!["CCS".to_string()];
        let mut rts = vec!["RTS".to_string()];
        for row in &self.rows {
            header.push(row.threads.to_string());
            ccs.push(fmt(row.ccs));
            rts.push(fmt(row.rts));
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|i| [&header[i], &ccs[i], &rts[i]].iter().map(|s| s.len()).max().unwrap())
            .collect();
        let render = |cells: &[String]| {
            cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{c:<width$}", width = widths[i])
                    } else {
                        format!("{c:>width$}", width = widths[i])
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
        };
        format!("{}\n{}\n{}\n", render(&header), render(&ccs), render(&rts))
    }

    /// CSV rendering with header `threads,k_done,wall_time_s,ccs,rts`;
    /// unreachable rows carry `nan`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        out.write_all(b"threads,k_done,wall_time_s,ccs,rts\n")?;
        for row in &self.rows {
            let ccs = row.ccs.unwrap_or(f64::NAN);
            let rts = row.rts.unwrap_or(f64::NAN);
            out.write_all(
                format!("{},{},{},{ccs},{rts}\n", row.threads, row.k_done, row.wall_time_s)
                    .as_bytes(),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RunReport;
    use crate::stepsize::{RunConfig, StepPlan, Variant};

    fn rel_err(got: f64, want: f64) -> f64 {
        (got - want).abs() / want.abs().max(1e-300)
    }

    fn fake_report(threads: usize, k_done: usize, wall: f64, objective: Vec<(usize, f64)>) -> RunReport {
        RunReport {
            variant: Variant::AsgdInconsistent,
            threads,
            k_done,
            wall_time_s: wall,
            observed_staleness_max: 0,
            step_plan: StepPlan {
                alpha1: 4.0,
                alpha2: 1.0,
                alpha3: 4.0,
                gamma: 0.1,
                t_max: 1.0,
                theta_ok: true,
                rate_bound: 1.0,
                variant: Variant::AsgdInconsistent,
                cfg: RunConfig::default(),
                mu: None,
                warnings: Vec::new(),
            },
            grad_norm_sq: Vec::new(),
            objective,
            final_x: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    #[test]
    fn single_snapshot_mean_is_its_own_value() {
        // A single gradient (3, 4) has squared norm 25.
        assert_eq!(trace_mean(&[(5, 25.0)]).unwrap(), 25.0);
    }

    #[test]
    fn zero_trace_means_zero() {
        assert_eq!(trace_mean(&[(0, 0.0), (10, 0.0), (20, 0.0)]).unwrap(), 0.0);
    }

    #[test]
    fn unit_stride_trapezoid_matches_the_plain_mean_on_constant_traces() {
        let trace: Vec<(usize, f64)> = (0..=50).map(|k| (k, 3.25)).collect();
        let plain = 3.25;
        assert_eq!(trace_mean(&trace).unwrap(), plain);
    }

    #[test]
    fn trapezoid_mean_matches_a_hand_computation() {
        // Piecewise-linear trace over [0, 10]: values 8, 4, 2 at k = 0, 5, 10.
        // Integral = 5*(8+4)/2 + 5*(4+2)/2 = 30 + 15 = 45; mean = 4.5.
        let got = trace_mean(&[(0, 8.0), (5, 4.0), (10, 2.0)]).unwrap();
        assert!(rel_err(got, 4.5) < 1e-15);
    }

    #[test]
    fn trace_mean_is_stride_invariant_on_constant_traces() {
        let coarse: Vec<(usize, f64)> = vec![(0, 1.5), (7, 1.5), (21, 1.5), (100, 1.5)];
        let fine: Vec<(usize, f64)> = (0..=100).map(|k| (k, 1.5)).collect();
        assert_eq!(trace_mean(&coarse).unwrap(), trace_mean(&fine).unwrap());
    }

    #[test]
    fn degenerate_traces_are_rejected() {
        assert!(trace_mean(&[]).is_err());
        assert!(trace_mean(&[(3, 1.0), (3, 2.0)]).is_err());
        assert!(trace_mean(&[(5, 1.0), (2, 2.0)]).is_err());
    }

    #[test]
    fn rmse_of_exact_predictions_is_zero() {
        assert_eq!(rmse(&[1.0, -2.0, 3.0], &[1.0, -2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn rmse_matches_the_direct_formula() {
        // Residuals (3, 4): sqrt(25 / 2).
        let got = rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert!(rel_err(got, (12.5f64).sqrt()) < 1e-15);
    }

    #[test]
    fn rmse_of_a_constant_offset_is_its_magnitude() {
        let truth = [0.4, -1.0, 2.2, 7.0];
        let pred: Vec<f64> = truth.iter().map(|t| t - 1.75).collect();
        assert!(rel_err(rmse(&pred, &truth).unwrap(), 1.75) < 1e-15);
    }

    #[test]
    fn rmse_rejects_mismatched_or_empty_inputs() {
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn rmse_is_symmetric_and_absolutely_homogeneous() {
        let mut rng = crate::rng::stream_rng(3, 3);
        for _ in 0..100 {
            let a = crate::rng::normal_vec(&mut rng, 6);
            let b = crate::rng::normal_vec(&mut rng, 6);
            let ab = rmse(&a, &b).unwrap();
            assert_eq!(ab, rmse(&b, &a).unwrap());
            let ca: Vec<f64> = a.iter().map(|v| 2.5 * v).collect();
            let cb: Vec<f64> = b.iter().map(|v| 2.5 * v).collect();
            assert!(rel_err(rmse(&ca, &cb).unwrap(), 2.5 * ab) < 1e-12);
        }
    }

    #[test]
    fn trivial_speedup_table_is_all_ones() {
        let base = fake_report(1, 1000, 2.0, vec![(0, 1.0)]);
        let table = speedup(&[&base], SpeedupMode::FixedK, None).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].ccs, Some(1.0));
        assert_eq!(table.rows[0].rts, Some(1.0));
    }

    #[test]
    fn fixed_iteration_speedup_uses_wall_time_ratios() {
        let base = fake_report(1, 1000, 2.0, vec![(0, 1.0)]);
        let two = fake_report(2, 1000, 1.25, vec![(0, 1.0)]);
        let four = fake_report(4, 1001, 0.625, vec![(0, 1.0)]);
        let table = speedup(&[&base, &two, &four], SpeedupMode::FixedK, None).unwrap();
        assert_eq!(table.rows[1].ccs, Some(2.0));
        assert!(rel_err(table.rows[1].rts.unwrap(), 1.6) < 1e-12);
        assert_eq!(table.rows[2].ccs, Some(4.0));
        assert!(rel_err(table.rows[2].rts.unwrap(), 3.2) < 1e-12);
        // With the baseline at least as fast per iteration, rts stays within
        // the worker count (1.05 slack for timer noise).
        for row in &table.rows {
            assert!(row.rts.unwrap() <= row.threads as f64 * 1.05);
        }
    }

    #[test]
    fn missing_baseline_is_rejected() {
        let two = fake_report(2, 1000, 1.0, vec![(0, 1.0)]);
        assert!(speedup(&[&two], SpeedupMode::FixedK, None).is_err());
        let b1 = fake_report(1, 1000, 1.0, vec![(0, 1.0)]);
        let b2 = fake_report(1, 1000, 1.0, vec![(0, 1.0)]);
        assert!(speedup(&[&b1, &b2], SpeedupMode::FixedK, None).is_err());
    }

    #[test]
    fn to_target_counts_iterations_to_first_crossing() {
        let base = fake_report(1, 1000, 10.0, vec![(0, 8.0), (500, 0.9), (1000, 0.5)]);
        let two = fake_report(2, 1000, 5.0, vec![(0, 8.0), (250, 0.8), (1000, 0.4)]);
        let table = speedup(&[&base, &two], SpeedupMode::ToTarget, Some(1.0)).unwrap();
        // Baseline reaches at 500 of 1000 iterations, the 2-worker run at 250.
        assert_eq!(table.rows[0].k_done, 500);
        assert_eq!(table.rows[1].k_done, 250);
        assert!(rel_err(table.rows[1].ccs.unwrap(), 500.0 / 250.0 * 2.0) < 1e-12);
        assert!(rel_err(table.rows[1].rts.unwrap(), 5.0 / 1.25) < 1e-12);
    }

    #[test]
    fn unreached_targets_are_marked() {
        let base = fake_report(1, 100, 1.0, vec![(0, 8.0), (100, 0.5)]);
        let two = fake_report(2, 100, 0.6, vec![(0, 8.0), (100, 3.0)]);
        let table = speedup(&[&base, &two], SpeedupMode::ToTarget, Some(1.0)).unwrap();
        assert!(table.rows[1].ccs.is_none());
        assert!(table.rows[1].rts.is_none());
        assert!(table.to_text().contains("unreachable"));
    }

    #[test]
    fn table_renders_header_and_csv() {
        let base = fake_report(1, 10, 1.0, vec![(0, 1.0)]);
        let two = fake_report(2, 10, 0.5, vec![(0, 1.0)]);
        let table = speedup(&[&base, &two], SpeedupMode::FixedK, None).unwrap();
        let text = table.to_text();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("thr-#"));
        assert!(lines.next().unwrap().starts_with("CCS"));
        assert!(lines.next().unwrap().starts_with("RTS"));
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("threads,k_done,wall_time_s,ccs,rts\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
