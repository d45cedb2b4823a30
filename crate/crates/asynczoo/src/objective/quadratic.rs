//! Strongly convex quadratic test problem with analytic constants.
//!
//! `F(x; xi) = 1/2 (x - c_xi)' A (x - c_xi)` with `A = diag(lambda)`,
//! eigenvalues log-spaced in `[1, condition]`. The spread of the component
//! centers `c_xi` controls the gradient variance.

use super::{check_component, check_point, LipschitzInfo, Problem, Provenance};
use crate::error::{Error, Result};
use crate::rng::{self, stream_rng};

#[derive(Debug, Clone)]
pub struct Quadratic {
    diag: Vec<f64>,
    centers: Vec<Vec<f64>>,
    mean_center: Vec<f64>,
    lip: LipschitzInfo,
}

/// Seeded factory: diagonal curvature log-spaced in `[1, condition]` and
/// component centers drawn from a standard Gaussian.
pub fn make_quadratic(n: usize, seed: u64, condition: f64, n_components: usize) -> Result<Quadratic> {
    if n < 1 {
        return Err(Error::validation("dimension must be at least 1"));
    }
    if !(condition.is_finite() && condition >= 1.0) {
        return Err(Error::validation("condition number must be >= 1"));
    }
    if n_components < 1 {
        return Err(Error::validation("need at least one component"));
    }
    let diag: Vec<f64> = if n == 1 {
        vec![condition]
    } else {
        (0..n).map(|i| condition.powf(i as f64 / (n - 1) as f64)).collect()
    };
    let mut rng = stream_rng(seed, rng::STREAM_PROBLEM);
    let centers: Vec<Vec<f64>> = (0..n_components).map(|_| rng::normal_vec(&mut rng, n)).collect();
    Quadratic::with_centers(diag, centers)
}

impl Quadratic {
    /// Explicit construction from a positive diagonal and component centers.
    pub fn with_centers(diag: Vec<f64>, centers: Vec<Vec<f64>>) -> Result<Self> {
        if diag.is_empty() || diag.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::validation("diagonal entries must be positive and finite"));
        }
        if centers.is_empty() || centers.iter().any(|c| c.len() != diag.len()) {
            return Err(Error::validation("every center must match the problem dimension"));
        }
        let n = diag.len();
        let mut mean_center = vec![0.0; n];
        for c in &centers {
            for (m, ci) in mean_center.iter_mut().zip(c) {
                *m += ci;
            }
        }
        for m in &mut mean_center {
            *m /= centers.len() as f64;
        }
        let l = diag.iter().cloned().fold(0.0, f64::max);
        let lip = LipschitzInfo::new(l, diag.clone(), Provenance::Analytic)?;
        Ok(Quadratic { diag, centers, mean_center, lip })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// The exact minimizer of the mean objective (the mean center).
    pub fn minimizer(&self) -> &[f64] {
        &self.mean_center
    }
}

impl Problem for Quadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn num_components(&self) -> usize {
        self.centers.len()
    }

    fn eval(&self, x: &[f64], xi: usize) -> Result<f64> {
        check_point(self, x)?;
        check_component(self, xi)?;
        let c = &self.centers[xi];
        let mut acc = 0.0;
        for i in 0..x.len() {
            let d = x[i] - c[i];
            acc += 0.5 * self.diag[i] * d * d;
        }
        Ok(acc)
    }

    fn grad(&self, x: &[f64], xi: usize) -> Result<Vec<f64>> {
        check_point(self, x)?;
        check_component(self, xi)?;
        let c = &self.centers[xi];
        Ok((0..x.len()).map(|i| self.diag[i] * (x[i] - c[i])).collect())
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn lipschitz(&self) -> &LipschitzInfo {
        &self.lip
    }

    fn grad_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(self, x)?;
        Ok((0..x.len()).map(|i| self.diag[i] * (x[i] - self.mean_center[i])).collect())
    }
}
