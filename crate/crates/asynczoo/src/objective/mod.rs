//! Stochastic objectives: the problem abstraction and built-in test problems.
//!
//! A problem is an objective of the form `f(x) = E_xi F(x; xi)` over a finite
//! index set of component functions. Every built-in exposes a zeroth-order
//! oracle (component values); most also expose component gradients. Problems
//! are immutable after construction, so all oracles may be called from any
//! number of threads without synchronization.

mod blackbox;
mod blend;
mod probes;
mod quadratic;

pub use blackbox::{make_noisy_blackbox, weight_count, NoisyBlackbox};
pub use blend::{make_blend, read_blend_csv, write_blend_csv, Blend};
pub use probes::{make_convex_probe, make_trig_probe, SeparableProbe};
pub use quadratic::{make_quadratic, Quadratic};

use crate::error::{Error, Result};
use crate::rng::{self, stream_rng};
use rand::Rng;

/// How a set of Lipschitz constants was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Estimated,
}

/// The family of Lipschitz constants attached to a problem.
///
/// `l` bounds the gradient variation over arbitrary perturbations, `l_coord[i]`
/// over single-coordinate perturbations, and `l_s(s)` over perturbations
/// confined to any `s` coordinates. The chain `l_max <= l_s(s) <= l` is
/// enforced at construction; estimated values that violate it are clamped and
/// the clamp is recorded.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LipschitzInfo {
    l: f64,
    l_coord: Vec<f64>,
    l_max: f64,
    provenance: Provenance,
    clamped: bool,
}

impl LipschitzInfo {
    pub fn new(l: f64, l_coord: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::validation("global Lipschitz constant must be finite and nonnegative"));
        }
        if l_coord.is_empty() || l_coord.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::validation(
                "per-coordinate Lipschitz constants must be nonempty, finite and nonnegative",
            ));
        }
        let l_max = l_coord.iter().cloned().fold(0.0, f64::max);
        // Chain repair: l must dominate every per-coordinate constant.
        let clamped = l < l_max;
        let l = l.max(l_max);
        Ok(LipschitzInfo { l, l_coord, l_max, provenance, clamped })
    }

    /// Global gradient Lipschitz constant.
    pub fn l(&self) -> f64 {
        self.l
    }

    /// Per-coordinate constants, one per dimension.
    pub fn l_coord(&self) -> &[f64] {
        &self.l_coord
    }

    /// Largest per-coordinate constant.
    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    /// Block constant for perturbations touching at most `s` coordinates,
    /// approximated by `min(l, s * l_max)`. Nondecreasing in `s` and pinned
    /// inside `[l_max, l]`; `s = 0` is treated as `s = 1`.
    pub fn l_s(&self, s: usize) -> f64 {
        let s = s.max(1) as f64;
        (s * self.l_max).min(self.l).max(self.l_max)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// True when construction had to clamp inconsistent estimates.
    pub fn was_clamped(&self) -> bool {
        self.clamped
    }
}

/// A stochastic objective `f(x) = (1/n) sum_xi F(x; xi)` over a finite set of
/// component functions, with Lipschitz metadata.
pub trait Problem: Send + Sync {
    /// Dimension of the optimization variable.
    fn dim(&self) -> usize;

    /// Number of component functions.
    fn num_components(&self) -> usize;

    /// Component value `F(x; xi)`. Deterministic given `(x, xi)`.
    fn eval(&self, x: &[f64], xi: usize) -> Result<f64>;

    /// Component gradient, if the problem exposes a first-order oracle.
    fn grad(&self, _x: &[f64], _xi: usize) -> Result<Vec<f64>> {
        Err(Error::UnsupportedOracle(
            "this problem only exposes function values".into(),
        ))
    }

    /// Whether [`Problem::grad`] is available.
    fn has_gradient(&self) -> bool {
        false
    }

    /// Lipschitz metadata for step-size computation.
    fn lipschitz(&self) -> &LipschitzInfo;

    /// Lower bound on the optimal value used by the step-size calculus.
    /// All built-ins are nonnegative losses, so the default is 0.
    fn f_star(&self) -> f64 {
        0.0
    }

    /// Starting point for a run with the given seed.
    fn initial_point(&self, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, rng::STREAM_INIT);
        rng::normal_vec(&mut rng, self.dim())
    }

    /// Mean objective `f(x)`, the arithmetic mean of all component values.
    fn eval_mean(&self, x: &[f64]) -> Result<f64> {
        let n = self.num_components();
        let mut acc = 0.0;
        for xi in 0..n {
            acc += self.eval(x, xi)?;
        }
        Ok(acc / n as f64)
    }

    /// Mean gradient. Uses the first-order oracle when available, otherwise
    /// central finite differences of [`Problem::eval_mean`] at step `1e-5`.
    fn grad_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.has_gradient() {
            let n = self.num_components();
            let mut acc = vec![0.0; self.dim()];
            for xi in 0..n {
                let g = self.grad(x, xi)?;
                for (a, gi) in acc.iter_mut().zip(&g) {
                    *a += gi;
                }
            }
            for a in &mut acc {
                *a /= n as f64;
            }
            Ok(acc)
        } else {
            fd_grad(x, 1e-5, |y| self.eval_mean(y))
        }
    }
}

/// Central-difference gradient of a scalar function, step `h` per coordinate.
pub fn fd_grad(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let xi = probe[i];
        probe[i] = xi + h;
        let plus = f(&probe)?;
        probe[i] = xi - h;
        let minus = f(&probe)?;
        probe[i] = xi;
        g[i] = (plus - minus) / (2.0 * h);
    }
    Ok(g)
}

/// Finite-difference surrogate for a component gradient on zeroth-order
/// problems. An estimate of a smoothed gradient, not the gradient itself.
pub fn fd_grad_component(problem: &dyn Problem, x: &[f64], xi: usize, h: f64) -> Result<Vec<f64>> {
    fd_grad(x, h, |y| problem.eval(y, xi))
}

fn check_point(problem: &dyn Problem, x: &[f64]) -> Result<()> {
    if x.len() != problem.dim() {
        return Err(Error::validation(format!(
            "point has dimension {}, problem has {}",
            x.len(),
            problem.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("point has non-finite entries"));
    }
    Ok(())
}

fn check_component(problem: &dyn Problem, xi: usize) -> Result<()> {
    if xi >= problem.num_components() {
        return Err(Error::IndexOutOfRange { index: xi, limit: problem.num_components() });
    }
    Ok(())
}

/// Sample variance of stochastic gradients at `x`: the mean of
/// `||grad F(x; xi) - grad f(x)||^2` over `n_samples` uniform component draws.
///
/// On zeroth-order problems a finite-difference step `mu` must be supplied;
/// the result is then an estimate of the analogous smoothed-gradient spread,
/// a related but distinct quantity.
pub fn estimate_sigma2(
    problem: &dyn Problem,
    x: &[f64],
    n_samples: usize,
    seed: u64,
    mu: Option<f64>,
) -> Result<f64> {
    if n_samples < 2 {
        return Err(Error::validation("sigma^2 estimation needs at least 2 samples"));
    }
    check_point(problem, x)?;
    let surrogate = !problem.has_gradient();
    if surrogate && mu.is_none() {
        return Err(Error::UnsupportedOracle(
            "problem has no gradients; pass a finite-difference step mu".into(),
        ));
    }
    let grad_at = |xi: usize| -> Result<Vec<f64>> {
        if surrogate {
            fd_grad_component(problem, x, xi, mu.unwrap())
        } else {
            problem.grad(x, xi)
        }
    };
    let mean = if surrogate {
        // Mean of the surrogate gradients themselves, over all components.
        let n = problem.num_components();
        let mut acc = vec![0.0; problem.dim()];
        for xi in 0..n {
            for (a, g) in acc.iter_mut().zip(grad_at(xi)?) {
                *a += g;
            }
        }
        for a in &mut acc {
            *a /= n as f64;
        }
        acc
    } else {
        problem.grad_mean(x)?
    };
    let mut rng = stream_rng(seed, rng::STREAM_SIGMA);
    let mut acc = 0.0;
    for _ in 0..n_samples {
        let xi = rng.gen_range(0..problem.num_components());
        let g = grad_at(xi)?;
        acc += g.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(acc / n_samples as f64)
}

/// Probes gradient-variation ratios on random pairs and along every
/// coordinate axis, inflates the maxima by a 1.5 safety factor, and returns
/// the result as estimated Lipschitz metadata.
///
/// First-order problems are probed with exact component gradients; zeroth-order
/// problems with central-difference surrogates.
pub fn estimate_lipschitz(problem: &dyn Problem, n_probes: usize, seed: u64) -> Result<LipschitzInfo> {
    const SAFETY: f64 = 1.5;
    const FD_STEP: f64 = 1e-4;
    let n = problem.dim();
    let n_probes = n_probes.max(1);
    let mut rng = stream_rng(seed, rng::STREAM_LIPSCHITZ);

    let grad_at = |x: &[f64], xi: usize| -> Result<Vec<f64>> {
        if problem.has_gradient() {
            problem.grad(x, xi)
        } else {
            fd_grad_component(problem, x, xi, FD_STEP)
        }
    };

    // Global constant: max over random pairs of ||g(x) - g(y)|| / ||x - y||.
    let mut l = 0.0f64;
    for p in 0..n_probes {
        let x = rng::normal_vec(&mut rng, n);
        let dir = rng::normal_vec(&mut rng, n);
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let scale = 10f64.powf(-((p % 3) as f64)); // step lengths 1, 0.1, 0.01
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + scale * d / norm).collect();
        let xi = rng.gen_range(0..problem.num_components());
        let gx = grad_at(&x, xi)?;
        let gy = grad_at(&y, xi)?;
        let num = gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        l = l.max(num / scale);
    }

    // i-th gradient component only; 2 evaluations on zeroth-order problems.
    let grad_coord_at = |x: &mut Vec<f64>, xi: usize, i: usize| -> Result<f64> {
        if problem.has_gradient() {
            Ok(problem.grad(x, xi)?[i])
        } else {
            let old = x[i];
            x[i] = old + FD_STEP;
            let plus = problem.eval(x, xi)?;
            x[i] = old - FD_STEP;
            let minus = problem.eval(x, xi)?;
            x[i] = old;
            Ok((plus - minus) / (2.0 * FD_STEP))
        }
    };

    // Per-coordinate constants from axis-aligned perturbations.
    let mut l_coord = vec![0.0f64; n];
    for (i, li) in l_coord.iter_mut().enumerate() {
        for p in 0..n_probes {
            let mut x = rng::normal_vec(&mut rng, n);
            let alpha = 10f64.powf(-((p % 3) as f64));
            let xi = rng.gen_range(0..problem.num_components());
            let g0 = grad_coord_at(&mut x, xi, i)?;
            x[i] += alpha;
            let g1 = grad_coord_at(&mut x, xi, i)?;
            *li = li.max((g1 - g0).abs() / alpha);
        }
        *li *= SAFETY;
    }
    LipschitzInfo::new(l * SAFETY, l_coord, Provenance::Estimated)
}

/// Wraps a problem and counts oracle calls; used to verify evaluation budgets.
pub struct CountingProblem<'a> {
    inner: &'a dyn Problem,
    evals: std::sync::atomic::AtomicU64,
    grads: std::sync::atomic::AtomicU64,
}

impl<'a> CountingProblem<'a> {
    pub fn new(inner: &'a dyn Problem) -> Self {
        CountingProblem {
            inner,
            evals: std::sync::atomic::AtomicU64::new(0),
            grads: std::sync::atomic::AtomicU64::new(0),
        }
    }

    pub fn evals(&self) -> u64 {
        self.evals.load(std::sync::atomic::Ordering::SeqCst)
    }

    pub fn grads(&self) -> u64 {
        self.grads.load(std::sync::atomic::Ordering::SeqCst)
    }
}

impl Problem for CountingProblem<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn num_components(&self) -> usize {
        self.inner.num_components()
    }
    fn eval(&self, x: &[f64], xi: usize) -> Result<f64> {
        self.evals.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        self.inner.eval(x, xi)
    }
    fn grad(&self, x: &[f64], xi: usize) -> Result<Vec<f64>> {
        self.grads.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        self.inner.grad(x, xi)
    }
    fn has_gradient(&self) -> bool {
        self.inner.has_gradient()
    }
    fn lipschitz(&self) -> &LipschitzInfo {
        self.inner.lipschitz()
    }
    fn f_star(&self) -> f64 {
        self.inner.f_star()
    }
    fn initial_point(&self, seed: u64) -> Vec<f64> {
        self.inner.initial_point(seed)
    }
}
