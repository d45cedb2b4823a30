//! Smooth probe functions with exact per-coordinate curvature bounds.
//!
//! These single-component objectives exist to verify the zeroth-order
//! smoothing machinery: `p(x) = sum_i a_i x_i^2 / 2 + b_i x_i + c_i g(d_i x_i)`
//! with `g = cos` (general smooth case) or `g = softplus` (convex case).
//! For both choices `|d^2 p / d x_i^2| <= a_i + |c_i| d_i^2` everywhere, and
//! that bound is what the per-coordinate Lipschitz metadata reports.

use super::{check_component, check_point, LipschitzInfo, Problem, Provenance};
use crate::error::{Error, Result};
use crate::rng::{self, stream_rng};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Wave {
    Cosine,
    Softplus,
}

/// Separable smooth test function, one component, analytic oracles.
#[derive(Debug, Clone)]
pub struct SeparableProbe {
    quad: Vec<f64>,
    linear: Vec<f64>,
    amp: Vec<f64>,
    freq: Vec<f64>,
    wave: Wave,
    lip: LipschitzInfo,
}

/// Random probe with cosine ripples; generally nonconvex.
pub fn make_trig_probe(n: usize, seed: u64) -> Result<SeparableProbe> {
    let mut rng = stream_rng(seed, rng::STREAM_PROBLEM);
    let quad: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    let linear: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let amp: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let freq: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
    SeparableProbe::new(quad, linear, amp, freq, Wave::Cosine)
}

/// Random convex probe (quadratic plus softplus terms with nonnegative
/// amplitudes).
pub fn make_convex_probe(n: usize, seed: u64) -> Result<SeparableProbe> {
    let mut rng = stream_rng(seed, rng::STREAM_PROBLEM);
    let quad: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    let linear: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let amp: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    let freq: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    SeparableProbe::new(quad, linear, amp, freq, Wave::Softplus)
}

fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else if t < -30.0 {
        0.0
    } else {
        (1.0 + t.exp()).ln()
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

impl SeparableProbe {
    fn new(
        quad: Vec<f64>,
        linear: Vec<f64>,
        amp: Vec<f64>,
        freq: Vec<f64>,
        wave: Wave,
    ) -> Result<Self> {
        if quad.is_empty() {
            return Err(Error::validation("probe needs at least one coordinate"));
        }
        // cos'' has sup 1; softplus'' = sigmoid' has sup 1/4. Use the common
        // bound 1 for both, so the metadata is valid (if slightly loose) in
        // the softplus case.
        let l_coord: Vec<f64> = quad
            .iter()
            .zip(amp.iter().zip(&freq))
            .map(|(a, (c, d))| a + c.abs() * d * d)
            .collect();
        let l = l_coord.iter().cloned().fold(0.0, f64::max);
        let lip = LipschitzInfo::new(l, l_coord, Provenance::Analytic)?;
        Ok(SeparableProbe { quad, linear, amp, freq, wave, lip })
    }

    pub fn is_convex(&self) -> bool {
        self.wave == Wave::Softplus
    }
}

impl Problem for SeparableProbe {
    fn dim(&self) -> usize {
        self.quad.len()
    }

    fn num_components(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], xi: usize) -> Result<f64> {
        check_point(self, x)?;
        check_component(self, xi)?;
        let mut acc = 0.0;
        for i in 0..x.len() {
            let t = self.freq[i] * x[i];
            let w = match self.wave {
                Wave::Cosine => t.cos(),
                Wave::Softplus => softplus(t),
            };
            acc += 0.5 * self.quad[i] * x[i] * x[i] + self.linear[i] * x[i] + self.amp[i] * w;
        }
        Ok(acc)
    }

    fn grad(&self, x: &[f64], xi: usize) -> Result<Vec<f64>> {
        check_point(self, x)?;
        check_component(self, xi)?;
        Ok((0..x.len())
            .map(|i| {
                let t = self.freq[i] * x[i];
                let dw = match self.wave {
                    Wave::Cosine => -t.sin(),
                    Wave::Softplus => sigmoid(t),
                };
                self.quad[i] * x[i] + self.linear[i] + self.amp[i] * self.freq[i] * dw
            })
            .collect())
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn lipschitz(&self) -> &LipschitzInfo {
        &self.lip
    }
}
