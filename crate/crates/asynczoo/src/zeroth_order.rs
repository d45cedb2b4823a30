//! Coordinate-wise zeroth-order gradient estimation and its smoothing theory.
//!
//! The estimator approximates the scaled block gradient `(N/Y) grad_S F(x; xi)`
//! from central differences along each selected coordinate:
//!
//! ```text
//! G_S(x; xi) = sum_{i in S} N / (2 Y mu_i) * (F(x + mu_i e_i; xi) - F(x - mu_i e_i; xi)) e_i
//! ```
//!
//! Each estimate costs exactly `2 |S|` function evaluations. The companion
//! smoothing operators (`smoothed_value`, `smoothed_grad_coord`) exist so the
//! estimator's bias bounds can be verified numerically: the coordinate
//! gradient of the uniform coordinate smoothing of `p` equals exactly the
//! central difference of `p`.

use crate::error::{Error, Result};
use crate::objective::{LipschitzInfo, Problem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Per-coordinate finite-difference step sizes, all strictly positive.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MuVector(Vec<f64>);

impl MuVector {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() || mu.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::validation("every finite-difference step must be positive"));
        }
        Ok(MuVector(mu))
    }

    /// All coordinates share one step size.
    pub fn uniform(n: usize, mu: f64) -> Result<Self> {
        MuVector::new(vec![mu; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for MuVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A sparse gradient estimate: strictly increasing coordinate indices and the
/// already-scaled values aligned with them.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradEstimate {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseGradEstimate {
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::validation("indices and values must have equal length"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("indices must be strictly increasing"));
        }
        Ok(SparseGradEstimate { indices, values })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }
}

fn validate_subset(n: usize, s: &[usize]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::validation("coordinate set must be nonempty"));
    }
    if s.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("coordinate set must be sorted and distinct"));
    }
    if *s.last().unwrap() >= n {
        return Err(Error::IndexOutOfRange { index: *s.last().unwrap(), limit: n });
    }
    Ok(())
}

/// Central-difference estimate of the scaled block gradient
/// `(N/Y) grad_S F(x; xi)`; exactly `2 |S|` oracle calls.
pub fn estimate_block(
    problem: &dyn Problem,
    x: &[f64],
    xi: usize,
    s: &[usize],
    mu: &MuVector,
) -> Result<SparseGradEstimate> {
    let n = problem.dim();
    validate_subset(n, s)?;
    if mu.len() != n {
        return Err(Error::validation("mu vector length must match the problem dimension"));
    }
    let y = s.len() as f64;
    let mut probe = x.to_vec();
    let mut values = Vec::with_capacity(s.len());
    for &i in s {
        let mu_i = mu[i];
        let old = probe[i];
        probe[i] = old + mu_i;
        let plus = problem.eval(&probe, xi)?;
        probe[i] = old - mu_i;
        let minus = problem.eval(&probe, xi)?;
        probe[i] = old;
        values.push(n as f64 / (2.0 * y * mu_i) * (plus - minus));
    }
    SparseGradEstimate::new(s.to_vec(), values)
}

/// Single-coordinate estimate: `estimate_block` with `S = {i}`, scale
/// `N / (2 mu_i)`.
pub fn estimate_coord(
    problem: &dyn Problem,
    x: &[f64],
    xi: usize,
    i: usize,
    mu_i: f64,
) -> Result<SparseGradEstimate> {
    let mu_full = full_mu(problem.dim(), i, mu_i)?;
    estimate_block(problem, x, xi, &[i], &mu_full)
}

fn full_mu(n: usize, i: usize, mu_i: f64) -> Result<MuVector> {
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, limit: n });
    }
    // Only coordinate i is probed; fill the rest with the same step.
    MuVector::uniform(n, mu_i)
}

/// Coordinate smoothing of the mean objective: the uniform average of
/// `f(x + v e_i)` over `v in [-mu_i, mu_i]`, evaluated by composite Simpson
/// quadrature with `quad_nodes` nodes. Verification support only; never used
/// on the optimizer path.
pub fn smoothed_value(
    problem: &dyn Problem,
    x: &[f64],
    i: usize,
    mu_i: f64,
    quad_nodes: usize,
) -> Result<f64> {
    if quad_nodes < 3 || quad_nodes % 2 == 0 {
        return Err(Error::validation("quadrature node count must be odd and >= 3"));
    }
    if !(mu_i.is_finite() && mu_i > 0.0) {
        return Err(Error::validation("mu must be positive"));
    }
    if i >= problem.dim() {
        return Err(Error::IndexOutOfRange { index: i, limit: problem.dim() });
    }
    let mut probe = x.to_vec();
    let h = 2.0 / (quad_nodes - 1) as f64;
    let mut acc = 0.0;
    for node in 0..quad_nodes {
        let v = -1.0 + h * node as f64;
        probe[i] = x[i] + v * mu_i;
        let w = if node == 0 || node == quad_nodes - 1 {
            1.0
        } else if node % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * problem.eval_mean(&probe)?;
    }
    // Simpson weights integrate over [-1, 1]; the smoothing carries a 1/2.
    Ok(0.5 * acc * h / 3.0)
}

/// The `i`-th gradient component of the coordinate smoothing of `F(.; xi)`:
/// exactly the plain central difference `(F(x + mu_i e_i) - F(x - mu_i e_i)) / (2 mu_i)`,
/// with no dimension scale. `estimate_coord` equals `N` times this.
pub fn smoothed_grad_coord(
    problem: &dyn Problem,
    x: &[f64],
    xi: usize,
    i: usize,
    mu_i: f64,
) -> Result<f64> {
    if !(mu_i.is_finite() && mu_i > 0.0) {
        return Err(Error::validation("mu must be positive"));
    }
    if i >= problem.dim() {
        return Err(Error::IndexOutOfRange { index: i, limit: problem.dim() });
    }
    let mut probe = x.to_vec();
    let old = probe[i];
    probe[i] = old + mu_i;
    let plus = problem.eval(&probe, xi)?;
    probe[i] = old - mu_i;
    let minus = problem.eval(&probe, xi)?;
    Ok((plus - minus) / (2.0 * mu_i))
}

/// The zeroth-order smoothing penalty `omega = sum_i L_i^2 mu_i^2 / N`.
///
/// Zero steps are allowed here: they encode the first-order limit.
pub fn omega(lip: &LipschitzInfo, mu: &[f64]) -> Result<f64> {
    if lip.l_coord().len() != mu.len() {
        return Err(Error::validation("mu length must match the coordinate constants"));
    }
    if mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::validation("mu entries must be finite and nonnegative"));
    }
    let n = mu.len() as f64;
    Ok(lip
        .l_coord()
        .iter()
        .zip(mu)
        .map(|(l, m)| l * l * m * m)
        .sum::<f64>()
        / n)
}

/// Uniform random size-`y` coordinate subset via partial Fisher-Yates,
/// returned sorted.
pub fn sample_coords(rng: &mut ChaCha8Rng, n: usize, y: usize) -> Vec<usize> {
    assert!(y >= 1 && y <= n, "subset size must be in [1, n]");
    if y == 1 {
        return vec![rng.gen_range(0..n)];
    }
    if y == n {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for j in 0..y {
        let pick = j + rng.gen_range(0..n - j);
        idx.swap(j, pick);
    }
    let mut s = idx[..y].to_vec();
    s.sort_unstable();
    s
}
