//! Step-size calculus: every derived constant of the convergence theory, and
//! validation of run configurations against its prerequisites.
//!
//! Conventions. `N` is the dimension, `Y` the coordinate-block size, `K` the
//! iteration budget, `T` the staleness bound, `sigma2` the gradient variance,
//! `omega` the zeroth-order smoothing penalty, and `L`, `L_Y`, `L_T`, `L_max`
//! the Lipschitz family. The derived quantities are
//!
//! ```text
//! alpha1 = 4 + 4 (T Y + Y^{3/2} T^2 / sqrt(N)) L_T^2 / (L_Y^2 N)
//! alpha2 = Y / ((f(x0) - f*) L_Y N)
//! alpha3 = (K (N omega + sigma2) alpha2 + 4) L_Y^2 / L_T^2
//! ```
//!
//! and the constant step size is `gamma = (Y/N) / (2 L_Y chi)` where `chi`
//! combines `alpha1..alpha3` (see [`chi`]). The ergodic squared-gradient mean
//! `sum_{k<K} ||grad f(x_k)||^2 / K` of a run that respects the staleness
//! ceiling is bounded by [`rate_bound`].

use crate::error::{Error, Result};
use crate::objective::{LipschitzInfo, Problem};
use crate::zeroth_order::{omega as omega_of, MuVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Which specialization of the generic update a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Free choice of block size and smoothing.
    Generic,
    /// Coordinate descent on the mean gradient: `Y = 1`, `sigma = omega = 0`.
    Ascd,
    /// Full-vector stochastic gradient with snapshot reads: `Y = N`, `omega = 0`.
    AsgdConsistent,
    /// Per-coordinate stochastic gradient on lock-free memory: `Y = 1`, `omega = 0`.
    AsgdInconsistent,
    /// Zeroth-order coordinate descent: `Y = 1`, central-difference estimates.
    Aszd,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Generic => "generic",
            Variant::Ascd => "ascd",
            Variant::AsgdConsistent => "asgd_consistent",
            Variant::AsgdInconsistent => "asgd_inconsistent",
            Variant::Aszd => "aszd",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(Variant::Generic),
            "ascd" => Ok(Variant::Ascd),
            "asgd_consistent" | "asgd-consistent" => Ok(Variant::AsgdConsistent),
            "asgd_inconsistent" | "asgd-inconsistent" => Ok(Variant::AsgdInconsistent),
            "aszd" => Ok(Variant::Aszd),
            other => Err(Error::validation(format!("unknown variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fully resolved inputs of the step-size calculus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub y: usize,
    pub k: usize,
    pub t: usize,
    pub sigma2: f64,
    pub omega: f64,
    pub f0_minus_fstar: f64,
    pub l: f64,
    pub l_y: f64,
    pub l_t: f64,
    pub l_max: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::validation("dimension must be at least 1"));
        }
        if self.y < 1 || self.y > self.n {
            return Err(Error::validation("block size must satisfy 1 <= Y <= N"));
        }
        if self.k < 1 {
            return Err(Error::validation("iteration budget must be at least 1"));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::validation("sigma2 must be finite and nonnegative"));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::validation("omega must be finite and nonnegative"));
        }
        if !(self.f0_minus_fstar > 0.0 && self.f0_minus_fstar.is_finite()) {
            return Err(Error::validation("f(x0) - f* must be positive and finite"));
        }
        for (name, v) in [("L", self.l), ("L_Y", self.l_y), ("L_T", self.l_t), ("L_max", self.l_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be positive and finite")));
            }
        }
        if self.l_max > self.l_y || self.l_y > self.l {
            return Err(Error::validation("need L_max <= L_Y <= L"));
        }
        if self.l_max > self.l_t || self.l_t > self.l {
            return Err(Error::validation("need L_max <= L_T <= L"));
        }
        Ok(())
    }

    /// Draws a random valid configuration; used by the self-consistency
    /// property suites. The staleness bound is drawn at or below the ceiling.
    pub fn sample(rng: &mut ChaCha8Rng) -> Self {
        let n = rng.gen_range(1..=64usize);
        let y = rng.gen_range(1..=n);
        let k = rng.gen_range(1..=1_000_000usize);
        let l_max = 10f64.powf(rng.gen_range(-2.0..2.0));
        let l = l_max * 10f64.powf(rng.gen_range(0.0..2.0));
        let interp = |u: f64| l_max * (l / l_max).powf(u);
        let l_y = interp(rng.gen_range(0.0..1.0));
        let l_t = interp(rng.gen_range(0.0..1.0));
        let sigma2 = if rng.gen_bool(0.3) { 0.0 } else { 10f64.powf(rng.gen_range(-3.0..2.0)) };
        let omega = if rng.gen_bool(0.5) { 0.0 } else { 10f64.powf(rng.gen_range(-8.0..-1.0)) };
        let f0_minus_fstar = 10f64.powf(rng.gen_range(-2.0..3.0));
        let mut cfg = RunConfig {
            n,
            y,
            k,
            t: 0,
            sigma2,
            omega,
            f0_minus_fstar,
            l,
            l_y,
            l_t,
            l_max,
        };
        let ceiling = max_staleness(&cfg).unwrap_or(0.0).floor().min(1000.0).max(0.0) as usize;
        cfg.t = rng.gen_range(0..=ceiling);
        cfg
    }
}

/// The three derived constants `(alpha1, alpha2, alpha3)`.
pub fn alphas(cfg: &RunConfig) -> Result<(f64, f64, f64)> {
    cfg.validate()?;
    let n = cfg.n as f64;
    let y = cfg.y as f64;
    let t = cfg.t as f64;
    let k = cfg.k as f64;
    let a1 = 4.0 + 4.0 * (t * y + y.powf(1.5) * t * t / n.sqrt()) * cfg.l_t * cfg.l_t
        / (cfg.l_y * cfg.l_y * n);
    let a2 = y / (cfg.f0_minus_fstar * cfg.l_y * n);
    let a3 = (k * (n * cfg.omega + cfg.sigma2) * a2 + 4.0) * cfg.l_y * cfg.l_y
        / (cfg.l_t * cfg.l_t);
    Ok((a1, a2, a3))
}

/// The constant step size prescribed for the configured run:
/// `1 / gamma = 2 L_Y N / Y * (sqrt(alpha1^2 / (K (N omega + sigma2) alpha2 + alpha1))
///              + sqrt(K (N omega + sigma2) alpha2))`.
pub fn step_size(cfg: &RunConfig) -> Result<f64> {
    let (a1, a2, _) = alphas(cfg)?;
    let n = cfg.n as f64;
    let y = cfg.y as f64;
    let s = cfg.k as f64 * (n * cfg.omega + cfg.sigma2) * a2;
    let gamma_inv = 2.0 * cfg.l_y * n / y * ((a1 * a1 / (s + a1)).sqrt() + s.sqrt());
    Ok(1.0 / gamma_inv)
}

/// The staleness ceiling: the run's `T` must not exceed
/// `sqrt(N) / (2 sqrt(Y)) * (sqrt(1 + 4 alpha3 sqrt(N) / sqrt(Y)) - 1)`.
/// Does not depend on `cfg.t` except through the supplied `L_T`.
pub fn max_staleness(cfg: &RunConfig) -> Result<f64> {
    let (_, _, a3) = alphas(cfg)?;
    let n = cfg.n as f64;
    let y = cfg.y as f64;
    Ok(n.sqrt() / (2.0 * y.sqrt()) * ((1.0 + 4.0 * a3 * n.sqrt() / y.sqrt()).sqrt() - 1.0))
}

/// Worst-case margin of the per-step stability condition for a constant
/// schedule: missing sets of full size `T`, each inner sum at its cap
/// `(T - 1) gamma`:
///
/// ```text
/// theta = N gamma / 2 - 2 gamma^2 (L_Y / Y) N^2
///         - 2 L_T^2 (N^2 / Y^2) gamma * T gamma (gamma Y + Y^{3/2} (T-1) gamma / sqrt(N))
/// ```
pub fn theta_margin(cfg: &RunConfig, gamma: f64) -> Result<f64> {
    cfg.validate()?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::validation("gamma must be positive and finite"));
    }
    let n = cfg.n as f64;
    let y = cfg.y as f64;
    let t = cfg.t as f64;
    let older = (t - 1.0).max(0.0);
    let stale_sum = t * gamma * (gamma * y + y.powf(1.5) * older * gamma / n.sqrt());
    Ok(n * gamma / 2.0
        - 2.0 * gamma * gamma * (cfg.l_y / y) * n * n
        - 2.0 * cfg.l_t * cfg.l_t * (n * n / (y * y)) * gamma * stale_sum)
}

/// True when the stability condition holds for the constant schedule `gamma`,
/// up to a relative floating-point slack of 1e-9 on the leading term (the
/// prescribed step size sits exactly on the boundary in the delay-free case).
pub fn check_theta(cfg: &RunConfig, gamma: f64) -> Result<bool> {
    let margin = theta_margin(cfg, gamma)?;
    let scale = cfg.n as f64 * gamma / 2.0;
    Ok(margin >= -1e-9 * scale)
}

/// The smallest multiplier admissible in [`step_size_for_chi`]:
/// `sqrt(1 + (L_T^2/L_Y^2) (Y/N + Y^{3/2} T / N^{3/2}) T) + 1`.
pub fn chi_floor(cfg: &RunConfig) -> Result<f64> {
    cfg.validate()?;
    let n = cfg.n as f64;
    let y = cfg.y as f64;
    let t = cfg.t as f64;
    let ratio = cfg.l_t * cfg.l_t / (cfg.l_y * cfg.l_y);
    Ok((1.0 + ratio * (y / n + y.powf(1.5) * t / n.powf(1.5)) * t).sqrt() + 1.0)
}

/// Step size `gamma = (Y/N) / (2 L_Y chi)` for an explicitly chosen `chi`.
/// `chi` below [`chi_floor`] is rejected (the stability condition would not
/// be certified).
pub fn step_size_for_chi(cfg: &RunConfig, chi: f64) -> Result<f64> {
    let floor = chi_floor(cfg)?;
    if chi < floor * (1.0 - 1e-12) {
        return Err(Error::validation(format!(
            "chi = {chi} is below the admissible floor {floor}"
        )));
    }
    let n = cfg.n as f64;
    let y = cfg.y as f64;
    Ok(y / n / (2.0 * cfg.l_y * chi))
}

/// The optimal `chi`:
/// `sqrt(alpha1^2 / (K (N omega + sigma2) alpha2 + alpha1)) + sqrt(K (N omega + sigma2) alpha2)`.
/// [`step_size`] equals `(Y/N) / (2 L_Y chi(cfg))` identically.
pub fn chi(cfg: &RunConfig) -> Result<f64> {
    let (a1, a2, _) = alphas(cfg)?;
    let s = cfg.k as f64 * (cfg.n as f64 * cfg.omega + cfg.sigma2) * a2;
    Ok((a1 * a1 / (s + a1)).sqrt() + s.sqrt())
}

/// Upper bound on the ergodic squared-gradient mean of a run at the
/// prescribed step size, valid whenever `T <= max_staleness`:
///
/// ```text
/// 20 / (K alpha2)
///   + ( (L_T^2 / L_Y^2) (sqrt(1 + 4 alpha3 sqrt(N/Y)) - 1) / sqrt(N/Y)
///       + 11 sqrt(N omega + sigma2) sqrt(K alpha2) ) / (K alpha2)
///   + N omega
/// ```
pub fn rate_bound(cfg: &RunConfig) -> Result<f64> {
    let (_, a2, a3) = alphas(cfg)?;
    let ceiling = max_staleness(cfg)?;
    if cfg.t as f64 > ceiling {
        return Err(Error::Prerequisite(format!(
            "staleness T = {} exceeds the ceiling {ceiling:.3}",
            cfg.t
        )));
    }
    let n = cfg.n as f64;
    let y = cfg.y as f64;
    let k = cfg.k as f64;
    let ratio = cfg.l_t * cfg.l_t / (cfg.l_y * cfg.l_y);
    let stale_term = ratio * ((1.0 + 4.0 * a3 * (n / y).sqrt()).sqrt() - 1.0) / (n / y).sqrt();
    let noise_term = 11.0 * (n * cfg.omega + cfg.sigma2).sqrt() * (k * a2).sqrt();
    Ok(20.0 / (k * a2) + (stale_term + noise_term) / (k * a2) + n * cfg.omega)
}

/// Largest smoothing step admitted by the zeroth-order theory for a budget of
/// `K` iterations at gradient variance `sigma2` in dimension `N`, with all
/// hidden constants set to 1:
/// `1/sqrt(K) + min(sqrt(sigma) (N K)^{-1/4}, sigma / sqrt(N))`.
pub fn mu_budget(k: usize, sigma2: f64, n: usize) -> f64 {
    let sigma = sigma2.max(0.0).sqrt();
    let k = k as f64;
    let n = n as f64;
    1.0 / k.sqrt() + (sigma.sqrt() * (n * k).powf(-0.25)).min(sigma / n.sqrt())
}

/// A validated run recipe: the derived constants, the step size, the
/// staleness ceiling and the predicted rate, plus everything the engine
/// needs to execute it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepPlan {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub gamma: f64,
    pub t_max: f64,
    pub theta_ok: bool,
    pub rate_bound: f64,
    pub variant: Variant,
    #[serde(skip)]
    pub cfg: RunConfig,
    #[serde(skip)]
    pub mu: Option<MuVector>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Problem facts consumed by [`plan`].
#[derive(Debug, Clone)]
pub struct ProblemMeta {
    pub n: usize,
    pub lipschitz: LipschitzInfo,
    pub f0_minus_fstar: f64,
}

impl ProblemMeta {
    /// Reads the metadata off a problem at the starting point `x0`.
    pub fn for_problem(problem: &dyn Problem, x0: &[f64]) -> Result<Self> {
        Ok(ProblemMeta {
            n: problem.dim(),
            lipschitz: problem.lipschitz().clone(),
            f0_minus_fstar: problem.eval_mean(x0)? - problem.f_star(),
        })
    }
}

/// Assembles and validates a [`StepPlan`] for the chosen variant.
///
/// The variant forces its structural parameters: coordinate descent pins
/// `Y = 1` and zeroes both noise terms, the full-vector gradient variant pins
/// `Y = N`, the per-coordinate gradient variant pins `Y = 1`, and the
/// zeroth-order variant pins `Y = 1` and derives `omega` from the smoothing
/// steps (defaulting to a uniform step within [`mu_budget`]). A smoothing
/// step above the budget produces a warning, not an error. `y` is only
/// consulted for the generic variant; `gamma_override` replaces the
/// prescribed step size and is re-checked against the stability condition.
#[allow(clippy::too_many_arguments)]
pub fn plan(
    variant: Variant,
    meta: &ProblemMeta,
    k: usize,
    t: usize,
    sigma2: f64,
    mu: Option<MuVector>,
    y: Option<usize>,
    gamma_override: Option<f64>,
) -> Result<StepPlan> {
    let n = meta.n;
    let mut warnings = Vec::new();
    if meta.lipschitz.was_clamped() {
        warnings.push("estimated Lipschitz constants were clamped into a consistent chain".into());
    }
    let first_order = !matches!(variant, Variant::Aszd | Variant::Generic);
    if first_order && mu.is_some() {
        return Err(Error::validation(format!(
            "variant {variant} uses exact gradients; a smoothing step mu is meaningless"
        )));
    }
    let (y, sigma2, mu) = match variant {
        Variant::Ascd => (1, 0.0, None),
        Variant::AsgdConsistent => (n, sigma2, None),
        Variant::AsgdInconsistent => (1, sigma2, None),
        Variant::Aszd => {
            let mu = match mu {
                Some(m) => m,
                None => {
                    let budget = mu_budget(k, sigma2, n);
                    MuVector::uniform(n, (1.0 / (k as f64).sqrt()).min(budget))?
                }
            };
            (1, sigma2, Some(mu))
        }
        Variant::Generic => {
            let y = y.unwrap_or(1);
            (y, sigma2, mu)
        }
    };
    if let Some(m) = &mu {
        if m.len() != n {
            return Err(Error::validation("mu vector length must match the dimension"));
        }
        let budget = mu_budget(k, sigma2, n);
        let largest = m.as_slice().iter().cloned().fold(0.0, f64::max);
        if largest > budget {
            warnings.push(format!(
                "largest smoothing step {largest:.3e} exceeds the admitted budget {budget:.3e}; \
                 the zeroth-order rate guarantee may not apply"
            ));
        }
    }
    let omega = match &mu {
        Some(m) => omega_of(&meta.lipschitz, m.as_slice())?,
        None => 0.0,
    };
    let cfg = RunConfig {
        n,
        y,
        k,
        t,
        sigma2,
        omega,
        f0_minus_fstar: meta.f0_minus_fstar,
        l: meta.lipschitz.l(),
        l_y: meta.lipschitz.l_s(y),
        l_t: meta.lipschitz.l_s(t),
        l_max: meta.lipschitz.l_max(),
    };
    let (alpha1, alpha2, alpha3) = alphas(&cfg)?;
    let gamma = match gamma_override {
        Some(g) => {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::validation("gamma override must be positive and finite"));
            }
            g
        }
        None => step_size(&cfg)?,
    };
    let t_max = max_staleness(&cfg)?;
    let theta_ok = check_theta(&cfg, gamma)?;
    let bound = if cfg.t as f64 <= t_max {
        rate_bound(&cfg)?
    } else {
        warnings.push(format!(
            "staleness T = {} exceeds the ceiling {t_max:.3}; no rate guarantee",
            cfg.t
        ));
        f64::INFINITY
    };
    Ok(StepPlan {
        alpha1,
        alpha2,
        alpha3,
        gamma,
        t_max,
        theta_ok,
        rate_bound: bound,
        variant,
        cfg,
        mu,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{LipschitzInfo, Provenance};
    use crate::rng::stream_rng;

    fn rel_err(got: f64, want: f64) -> f64 {
        (got - want).abs() / want.abs().max(1e-300)
    }

    fn flat_cfg() -> RunConfig {
        // All constants equal: the coordinate-descent corner case.
        RunConfig {
            n: 2,
            y: 1,
            k: 1000,
            t: 0,
            sigma2: 0.0,
            omega: 0.0,
            f0_minus_fstar: 1.0,
            l: 2.0,
            l_y: 2.0,
            l_t: 2.0,
            l_max: 2.0,
        }
    }

    fn meta(n: usize, l: f64) -> ProblemMeta {
        ProblemMeta {
            n,
            lipschitz: LipschitzInfo::new(l, vec![l; n], Provenance::Analytic).unwrap(),
            f0_minus_fstar: 1.0,
        }
    }

    #[test]
    fn alpha1_is_four_without_staleness() {
        let (a1, _, _) = alphas(&flat_cfg()).unwrap();
        assert_eq!(a1, 4.0);
    }

    #[test]
    fn alpha2_matches_the_direct_formula() {
        let (_, a2, _) = alphas(&flat_cfg()).unwrap();
        assert_eq!(a2, 0.25);
    }

    #[test]
    fn alpha3_collapses_without_noise() {
        let mut cfg = flat_cfg();
        cfg.k = 123_456; // K only enters through the noise product
        let (_, _, a3) = alphas(&cfg).unwrap();
        assert_eq!(a3, 4.0);
    }

    #[test]
    fn nonpositive_objective_gap_is_rejected() {
        let mut cfg = flat_cfg();
        cfg.f0_minus_fstar = 0.0;
        assert!(matches!(alphas(&cfg), Err(crate::error::Error::Validation(_))));
    }

    #[test]
    fn coordinate_descent_corner_step_is_one_sixteenth() {
        assert_eq!(step_size(&flat_cfg()).unwrap(), 0.0625);
    }

    #[test]
    fn step_scales_like_inverse_sqrt_k_under_noise() {
        let mut cfg = flat_cfg();
        cfg.sigma2 = 1.0;
        cfg.k = 1_000_000;
        let g1 = step_size(&cfg).unwrap();
        cfg.k = 4_000_000;
        let g2 = step_size(&cfg).unwrap();
        assert!(g2 < g1);
        let scaled1 = g1 * 1000.0;
        let scaled2 = g2 * 2000.0;
        assert!(rel_err(scaled1, scaled2) < 0.05, "{scaled1} vs {scaled2}");
    }

    #[test]
    fn step_ignores_the_budget_without_noise() {
        let mut cfg = flat_cfg();
        cfg.k = 10;
        let g1 = step_size(&cfg).unwrap();
        cfg.k = 1_000_000;
        assert_eq!(step_size(&cfg).unwrap(), g1);
    }

    #[test]
    fn staleness_ceiling_matches_the_coordinate_descent_form() {
        let mut cfg = flat_cfg();
        cfg.n = 16;
        cfg.l_t = 1.5;
        cfg.l_max = 1.0;
        cfg.l_y = 1.0;
        cfg.l = 2.0;
        let got = max_staleness(&cfg).unwrap();
        let n = 16.0f64;
        let ratio = cfg.l_max * cfg.l_max / (cfg.l_t * cfg.l_t);
        let want = n.sqrt() / 2.0 * ((1.0 + 16.0 * ratio * n.sqrt()).sqrt() - 1.0);
        assert!(rel_err(got, want) < 1e-12);
    }

    #[test]
    fn staleness_ceiling_grows_with_the_budget_under_noise() {
        let mut cfg = flat_cfg();
        cfg.sigma2 = 0.5;
        cfg.k = 1000;
        let t1 = max_staleness(&cfg).unwrap();
        cfg.k = 2000;
        let t2 = max_staleness(&cfg).unwrap();
        assert!(t2 > t1);
    }

    #[test]
    fn staleness_ceiling_in_one_dimension() {
        let mut cfg = flat_cfg();
        cfg.n = 1;
        cfg.y = 1;
        cfg.sigma2 = 2.0;
        let (_, _, a3) = alphas(&cfg).unwrap();
        let want = 0.5 * ((1.0 + 4.0 * a3).sqrt() - 1.0);
        assert!(rel_err(max_staleness(&cfg).unwrap(), want) < 1e-12);
    }

    #[test]
    fn stability_check_accepts_the_delay_free_boundary() {
        let cfg = flat_cfg();
        let boundary = 1.0 / (4.0 * cfg.l_y * cfg.n as f64); // Y / (4 L_Y N)
        assert!(check_theta(&cfg, boundary).unwrap());
        assert!(!check_theta(&cfg, boundary * (1.0 + 1e-6)).unwrap());
    }

    #[test]
    fn stability_check_rejects_inflated_steps_under_staleness() {
        let mut cfg = flat_cfg();
        cfg.n = 64;
        cfg.t = 8;
        let g = step_size(&cfg).unwrap();
        assert!(check_theta(&cfg, g).unwrap());
        assert!(!check_theta(&cfg, 10.0 * g).unwrap());
    }

    #[test]
    fn chi_reduces_to_sqrt_alpha1_without_noise() {
        let mut cfg = flat_cfg();
        cfg.t = 3;
        cfg.n = 32;
        let (a1, _, _) = alphas(&cfg).unwrap();
        assert!(rel_err(chi(&cfg).unwrap(), a1.sqrt()) < 1e-14);
    }

    #[test]
    fn chi_squared_dominates_alpha1() {
        let mut rng = stream_rng(17, 0);
        for _ in 0..500 {
            let cfg = RunConfig::sample(&mut rng);
            let (a1, _, _) = alphas(&cfg).unwrap();
            let c = chi(&cfg).unwrap();
            assert!(c * c >= a1 * (1.0 - 1e-12), "chi^2 = {} < alpha1 = {a1}", c * c);
        }
    }

    #[test]
    fn chi_is_dominated_by_the_noise_radical_for_large_budgets() {
        let mut cfg = flat_cfg();
        cfg.sigma2 = 1.0;
        cfg.k = 100_000_000;
        let (_, a2, _) = alphas(&cfg).unwrap();
        let s = cfg.k as f64 * cfg.sigma2 * a2;
        let c = chi(&cfg).unwrap();
        assert!(rel_err(c, s.sqrt()) < 1e-3);
    }

    #[test]
    fn chi_floor_is_two_without_staleness_and_reproduces_the_boundary_step() {
        let cfg = flat_cfg();
        assert_eq!(chi_floor(&cfg).unwrap(), 2.0);
        let g = step_size_for_chi(&cfg, 2.0).unwrap();
        assert!(rel_err(g, 1.0 / (4.0 * cfg.l_y * cfg.n as f64)) < 1e-15);
        assert!(check_theta(&cfg, g).unwrap());
    }

    #[test]
    fn explicit_chi_below_the_floor_is_rejected_naming_the_floor() {
        let mut cfg = flat_cfg();
        cfg.t = 4;
        cfg.n = 16;
        let floor = chi_floor(&cfg).unwrap();
        match step_size_for_chi(&cfg, floor * 0.9) {
            Err(crate::error::Error::Validation(msg)) => {
                assert!(msg.contains(&format!("{floor}")), "message: {msg}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
        // The floor itself is accepted and certified.
        let g = step_size_for_chi(&cfg, floor).unwrap();
        assert!(check_theta(&cfg, g).unwrap());
    }

    #[test]
    fn doubling_chi_halves_the_step() {
        let mut cfg = flat_cfg();
        cfg.t = 2;
        cfg.n = 9;
        let floor = chi_floor(&cfg).unwrap();
        let g1 = step_size_for_chi(&cfg, floor).unwrap();
        let g2 = step_size_for_chi(&cfg, 2.0 * floor).unwrap();
        assert!(rel_err(g2, 0.5 * g1) < 1e-15);
    }

    #[test]
    fn step_factorizations_agree() {
        let mut rng = stream_rng(23, 0);
        for _ in 0..1000 {
            let cfg = RunConfig::sample(&mut rng);
            let direct = step_size(&cfg).unwrap();
            let via_chi = step_size_for_chi(&cfg, chi(&cfg).unwrap()).unwrap();
            assert!(rel_err(direct, via_chi) < 1e-12, "{direct} vs {via_chi}");
        }
    }

    #[test]
    fn prescribed_step_is_always_stable_below_the_ceiling() {
        let mut rng = stream_rng(29, 0);
        for _ in 0..1000 {
            let cfg = RunConfig::sample(&mut rng);
            assert!(cfg.t as f64 <= max_staleness(&cfg).unwrap());
            let g = step_size(&cfg).unwrap();
            assert!(check_theta(&cfg, g).unwrap(), "cfg {cfg:?}");
        }
    }

    #[test]
    fn rate_bound_last_term_is_exactly_the_smoothing_penalty() {
        // Hold N*omega + sigma2 fixed; only the additive tail moves.
        let mut with_noise = flat_cfg();
        with_noise.sigma2 = 3.0;
        let mut with_smoothing = flat_cfg();
        with_smoothing.omega = 0.5;
        with_smoothing.sigma2 = 3.0 - with_smoothing.n as f64 * 0.5;
        let b1 = rate_bound(&with_noise).unwrap();
        let b2 = rate_bound(&with_smoothing).unwrap();
        let n_omega = with_smoothing.n as f64 * with_smoothing.omega;
        assert!(rel_err(b2 - b1, n_omega) < 1e-12);
    }

    #[test]
    fn rate_bound_halves_when_the_budget_doubles_without_noise() {
        let mut cfg = flat_cfg();
        cfg.k = 500;
        let b1 = rate_bound(&cfg).unwrap();
        cfg.k = 1000;
        let b2 = rate_bound(&cfg).unwrap();
        assert!(rel_err(b2, 0.5 * b1) < 1e-12);
    }

    #[test]
    fn rate_bound_requires_the_staleness_prerequisite() {
        let mut cfg = flat_cfg();
        cfg.t = 10_000_000;
        assert!(matches!(rate_bound(&cfg), Err(crate::error::Error::Prerequisite(_))));
    }

    #[test]
    fn rate_bound_never_grows_with_the_budget_without_smoothing() {
        let mut rng = stream_rng(31, 0);
        for _ in 0..300 {
            let mut cfg = RunConfig::sample(&mut rng);
            cfg.omega = 0.0; // shrinks the ceiling, so re-clamp T
            let ceiling = max_staleness(&cfg).unwrap().floor().max(0.0) as usize;
            cfg.t = cfg.t.min(ceiling);
            let b1 = rate_bound(&cfg).unwrap();
            cfg.k *= 2;
            let b2 = rate_bound(&cfg).unwrap();
            assert!(b2 <= b1 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn coordinate_descent_plan_zeroes_both_noise_terms() {
        let p = plan(Variant::Ascd, &meta(4, 2.0), 100, 0, 7.5, None, None, None).unwrap();
        assert_eq!(p.cfg.sigma2, 0.0);
        assert_eq!(p.cfg.omega, 0.0);
        assert_eq!(p.cfg.y, 1);
        // gamma = 1 / (2 L_max N sqrt(alpha1))
        let want = 1.0 / (2.0 * 2.0 * 4.0 * p.alpha1.sqrt());
        assert!(rel_err(p.gamma, want) < 1e-12);
    }

    #[test]
    fn full_vector_plan_uses_the_whole_block() {
        let p = plan(Variant::AsgdConsistent, &meta(6, 3.0), 100, 2, 1.0, None, None, None)
            .unwrap();
        assert_eq!(p.cfg.y, 6);
        assert_eq!(p.cfg.omega, 0.0);
    }

    #[test]
    fn delay_free_plans_pass_the_stability_check() {
        for variant in [Variant::Ascd, Variant::AsgdConsistent, Variant::AsgdInconsistent] {
            let p = plan(variant, &meta(5, 1.5), 1000, 0, 0.8, None, None, None).unwrap();
            assert!(p.theta_ok, "{variant} plan failed the stability check");
        }
    }

    #[test]
    fn smoothing_step_is_meaningless_for_gradient_variants() {
        let mu = MuVector::uniform(4, 0.1).unwrap();
        let err = plan(Variant::Ascd, &meta(4, 2.0), 100, 0, 0.0, Some(mu), None, None);
        assert!(matches!(err, Err(crate::error::Error::Validation(_))));
    }

    #[test]
    fn zeroth_order_plan_defaults_the_smoothing_step() {
        let p = plan(Variant::Aszd, &meta(4, 2.0), 10_000, 0, 1.0, None, None, None).unwrap();
        let mu = p.mu.as_ref().unwrap();
        let want = (1.0f64 / 100.0).min(mu_budget(10_000, 1.0, 4));
        assert_eq!(mu.as_slice(), &[want; 4]);
        assert!(p.cfg.omega > 0.0);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn oversized_smoothing_step_warns_but_runs() {
        let budget = mu_budget(10_000, 1.0, 4);
        let mu = MuVector::uniform(4, 10.0 * budget).unwrap();
        let p = plan(Variant::Aszd, &meta(4, 2.0), 10_000, 0, 1.0, Some(mu), None, None).unwrap();
        assert!(p.warnings.iter().any(|w| w.contains("budget")));
    }

    #[test]
    fn gamma_override_is_rechecked() {
        let p = plan(Variant::Ascd, &meta(4, 2.0), 100, 0, 0.0, None, None, Some(1e6)).unwrap();
        assert_eq!(p.gamma, 1e6);
        assert!(!p.theta_ok);
    }

    #[test]
    fn staleness_above_the_ceiling_warns_and_drops_the_guarantee() {
        let p = plan(Variant::Ascd, &meta(2, 1.0), 10, 1_000_000, 0.0, None, None, None).unwrap();
        assert!(p.rate_bound.is_infinite());
        assert!(p.warnings.iter().any(|w| w.contains("ceiling")));
    }

    #[test]
    fn sampled_configurations_are_always_valid() {
        let mut rng = stream_rng(37, 0);
        for _ in 0..500 {
            let cfg = RunConfig::sample(&mut rng);
            cfg.validate().unwrap();
            assert!(cfg.t as f64 <= max_staleness(&cfg).unwrap());
        }
    }
}
