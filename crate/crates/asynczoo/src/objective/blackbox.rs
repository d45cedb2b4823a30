//! Black-box parameter estimation problem.
//!
//! A fixed teacher network generates noisy input/output samples; the
//! optimization variable is the weight vector of a student network with the
//! same architecture, and the only oracle is the per-sample squared error.
//! Gradients are deliberately unavailable.

use super::{estimate_lipschitz, check_component, check_point, LipschitzInfo, Problem, Provenance};
use crate::error::{Error, Result};
use crate::rng::{self, stream_rng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct NoisyBlackbox {
    layer_sizes: Vec<usize>,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    teacher: Vec<f64>,
    dim: usize,
    lip: LipschitzInfo,
}

/// Number of weights (including biases) of the dense net with the given
/// layer widths.
pub fn weight_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

/// Simulates a black box: a teacher net with Gaussian weights maps Gaussian
/// inputs to targets, plus observation noise. Only function values of the
/// resulting fit objective are exposed.
pub fn make_noisy_blackbox(
    layer_sizes: &[usize],
    n_samples: usize,
    seed: u64,
    noise_std: f64,
) -> Result<NoisyBlackbox> {
    if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::validation("need at least 2 nonzero layer widths"));
    }
    if n_samples < 1 {
        return Err(Error::validation("need at least one sample"));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::validation("noise_std must be finite and nonnegative"));
    }
    let dim = weight_count(layer_sizes);
    let mut rng = stream_rng(seed, rng::STREAM_PROBLEM);
    let teacher = scaled_weights(&mut rng, layer_sizes, 1.0);
    let in_dim = layer_sizes[0];
    let mut inputs = Vec::with_capacity(n_samples);
    let mut targets = Vec::with_capacity(n_samples);
    let mut scratch = Scratch::new(layer_sizes);
    for _ in 0..n_samples {
        let input = rng::normal_vec(&mut rng, in_dim);
        let mut output = forward(layer_sizes, &teacher, &input, &mut scratch).to_vec();
        for o in &mut output {
            *o += noise_std * rng::normal(&mut rng);
        }
        inputs.push(input);
        targets.push(output);
    }
    let placeholder = LipschitzInfo::new(1.0, vec![1.0; dim], Provenance::Estimated)?;
    let mut problem = NoisyBlackbox {
        layer_sizes: layer_sizes.to_vec(),
        inputs,
        targets,
        teacher,
        dim,
        lip: placeholder,
    };
    problem.lip = estimate_lipschitz(&problem, 8, seed ^ 0x5eed_1215)?;
    Ok(problem)
}

fn scaled_weights(rng: &mut ChaCha8Rng, layer_sizes: &[usize], scale: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(weight_count(layer_sizes));
    for pair in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let std = scale / (fan_in as f64).sqrt();
        for _ in 0..(fan_in + 1) * fan_out {
            w.push(std * rng::normal(rng));
        }
    }
    w
}

struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Scratch {
    fn new(layer_sizes: &[usize]) -> Self {
        let widest = layer_sizes.iter().copied().max().unwrap_or(1);
        Scratch { a: vec![0.0; widest], b: vec![0.0; widest] }
    }

    fn fit(&mut self, layer_sizes: &[usize]) {
        let widest = layer_sizes.iter().copied().max().unwrap_or(1);
        if self.a.len() < widest {
            self.a.resize(widest, 0.0);
            self.b.resize(widest, 0.0);
        }
    }
}

thread_local! {
    // Per-thread activation buffers keep the hot evaluation path free of
    // allocations under concurrent workers.
    static SCRATCH: std::cell::RefCell<Scratch> =
        std::cell::RefCell::new(Scratch { a: Vec::new(), b: Vec::new() });
}

/// Dense forward pass: tanh on hidden layers, linear output layer.
/// Weight layout per layer: fan_out rows of fan_in weights, then fan_out biases.
fn forward<'s>(
    layer_sizes: &[usize],
    weights: &[f64],
    input: &[f64],
    scratch: &'s mut Scratch,
) -> &'s [f64] {
    let n_layers = layer_sizes.len() - 1;
    scratch.a[..input.len()].copy_from_slice(input);
    let mut offset = 0;
    let mut cur_len = input.len();
    for (layer, pair) in layer_sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bias_start = offset + fan_in * fan_out;
        for j in 0..fan_out {
            let row = &weights[offset + j * fan_in..offset + (j + 1) * fan_in];
            let mut acc = weights[bias_start + j];
            for (w, x) in row.iter().zip(&scratch.a[..cur_len]) {
                acc += w * x;
            }
            scratch.b[j] = if layer + 1 < n_layers { acc.tanh() } else { acc };
        }
        std::mem::swap(&mut scratch.a, &mut scratch.b);
        cur_len = fan_out;
        offset = bias_start + fan_out;
    }
    &scratch.a[..cur_len]
}

impl NoisyBlackbox {
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// The teacher weights; the global minimizer of the noiseless objective.
    pub fn teacher_weights(&self) -> &[f64] {
        &self.teacher
    }
}

impl Problem for NoisyBlackbox {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_components(&self) -> usize {
        self.inputs.len()
    }

    fn eval(&self, x: &[f64], xi: usize) -> Result<f64> {
        check_point(self, x)?;
        check_component(self, xi)?;
        let target = &self.targets[xi];
        SCRATCH.with(|cell| {
            let scratch = &mut *cell.borrow_mut();
            scratch.fit(&self.layer_sizes);
            let out = forward(&self.layer_sizes, x, &self.inputs[xi], scratch);
            Ok(out.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum())
        })
    }

    fn lipschitz(&self) -> &LipschitzInfo {
        &self.lip
    }

    /// Student weights start at a fan-in-scaled Gaussian point drawn from the
    /// run seed; distinct from the teacher with probability one.
    fn initial_point(&self, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, rng::STREAM_INIT);
        scaled_weights(&mut rng, &self.layer_sizes, 0.5)
    }
}
