//! Model-blending least squares.
//!
//! Given a matrix of per-model predictions `A` and true targets `r`, the
//! objective is `f(x) = ||Ax - r||^2 / n` over the training split, with one
//! component per training row: `F(x; xi) = (a_xi . x - r_xi)^2`. Rows held
//! out of training are kept for out-of-sample RMSE.

use super::{check_component, check_point, LipschitzInfo, Problem, Provenance};
use crate::error::{Error, Result};
use crate::rng::{self, stream_rng};
use std::io::{BufRead, Write};

#[derive(Debug, Clone)]
pub struct Blend {
    a_train: Vec<Vec<f64>>,
    r_train: Vec<f64>,
    a_test: Vec<Vec<f64>>,
    r_test: Vec<f64>,
    truth: Option<Vec<f64>>,
    lip: LipschitzInfo,
    warnings: Vec<String>,
}

/// Synthesizes a blending problem: Gaussian prediction matrix, hidden truth
/// coefficients, targets `r = A x* + noise`. The first half of the rows is
/// the training split, the second half is held out.
pub fn make_blend(n_rows: usize, n_models: usize, seed: u64, noise_std: f64) -> Result<Blend> {
    if n_rows < 2 || n_models < 1 {
        return Err(Error::validation("need at least 2 rows and 1 model"));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::validation("noise_std must be finite and nonnegative"));
    }
    let mut rng = stream_rng(seed, rng::STREAM_PROBLEM);
    let truth: Vec<f64> = rng::normal_vec(&mut rng, n_models)
        .into_iter()
        .map(|g| g / (n_models as f64).sqrt())
        .collect();
    let mut a = Vec::with_capacity(n_rows);
    let mut r = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let row = rng::normal_vec(&mut rng, n_models);
        let clean: f64 = row.iter().zip(&truth).map(|(ai, ti)| ai * ti).sum();
        r.push(clean + noise_std * rng::normal(&mut rng));
        a.push(row);
    }
    let mut blend = Blend::from_parts(a, r)?;
    blend.truth = Some(truth);
    Ok(blend)
}

impl Blend {
    /// Builds a blending problem from an explicit `A` matrix and targets.
    /// The first `floor(rows / 2)` rows form the training split.
    pub fn from_parts(a: Vec<Vec<f64>>, r: Vec<f64>) -> Result<Self> {
        if a.len() != r.len() || a.is_empty() {
            return Err(Error::validation("matrix and target lengths must match and be nonzero"));
        }
        let n_models = a[0].len();
        if n_models == 0 || a.iter().any(|row| row.len() != n_models) {
            return Err(Error::validation("all rows must have the same nonzero width"));
        }
        let n_train = (a.len() / 2).max(1);
        let mut warnings = Vec::new();
        if n_train < n_models {
            warnings.push(format!(
                "training split has {n_train} rows for {n_models} models; fit is underdetermined"
            ));
        }
        let a_test = a[n_train..].to_vec();
        let r_test = r[n_train..].to_vec();
        let a_train = a[..n_train].to_vec();
        let r_train = r[..n_train].to_vec();
        let lip = analytic_lipschitz(&a_train)?;
        Ok(Blend { a_train, r_train, a_test, r_test, truth: None, lip, warnings })
    }

    pub fn n_models(&self) -> usize {
        self.a_train[0].len()
    }

    pub fn n_train(&self) -> usize {
        self.a_train.len()
    }

    pub fn n_test(&self) -> usize {
        self.a_test.len()
    }

    /// Hidden truth coefficients when the problem was synthesized.
    pub fn truth(&self) -> Option<&[f64]> {
        self.truth.as_deref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// RMSE of the blend `x` on the training split (the square root of the
    /// objective value).
    pub fn train_rmse(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval_mean(x)?.sqrt())
    }

    /// RMSE of the blend `x` on the held-out split.
    pub fn heldout_rmse(&self, x: &[f64]) -> Result<f64> {
        check_point(self, x)?;
        if self.a_test.is_empty() {
            return Err(Error::validation("no held-out rows"));
        }
        let mut acc = 0.0;
        for (row, target) in self.a_test.iter().zip(&self.r_test) {
            let pred: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            let d = pred - target;
            acc += d * d;
        }
        Ok((acc / self.a_test.len() as f64).sqrt())
    }

    /// All rows (training split first), for CSV export.
    fn all_rows(&self) -> impl Iterator<Item = (&Vec<f64>, f64)> {
        self.a_train
            .iter()
            .zip(self.r_train.iter().copied())
            .chain(self.a_test.iter().zip(self.r_test.iter().copied()))
    }
}

fn analytic_lipschitz(a_train: &[Vec<f64>]) -> Result<LipschitzInfo> {
    let n_models = a_train[0].len();
    let n = a_train.len() as f64;
    // Component Hessian is 2 a a', so the component constants are exact.
    let mut l_coord = vec![0.0f64; n_models];
    let mut l_comp = 0.0f64;
    for row in a_train {
        let norm2: f64 = row.iter().map(|v| v * v).sum();
        l_comp = l_comp.max(2.0 * norm2);
        for (lc, v) in l_coord.iter_mut().zip(row) {
            *lc = lc.max(2.0 * v * v);
        }
    }
    // Mean Hessian is 2 A'A / n; bound its spectral norm by power iteration.
    let mut v = vec![1.0 / (n_models as f64).sqrt(); n_models];
    let mut lam = 0.0;
    for _ in 0..50 {
        let mut w = vec![0.0; n_models];
        for row in a_train {
            let dot: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (wi, ai) in w.iter_mut().zip(row) {
                *wi += dot * ai;
            }
        }
        lam = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lam == 0.0 {
            break;
        }
        for wi in &mut w {
            *wi /= lam;
        }
        v = w;
    }
    let l_mean = 2.0 * lam / n;
    LipschitzInfo::new(l_comp.max(l_mean), l_coord, Provenance::Analytic)
}

impl Problem for Blend {
    fn dim(&self) -> usize {
        self.n_models()
    }

    fn num_components(&self) -> usize {
        self.a_train.len()
    }

    fn eval(&self, x: &[f64], xi: usize) -> Result<f64> {
        check_point(self, x)?;
        check_component(self, xi)?;
        let pred: f64 = self.a_train[xi].iter().zip(x).map(|(a, b)| a * b).sum();
        let d = pred - self.r_train[xi];
        Ok(d * d)
    }

    fn grad(&self, x: &[f64], xi: usize) -> Result<Vec<f64>> {
        check_point(self, x)?;
        check_component(self, xi)?;
        let row = &self.a_train[xi];
        let resid: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.r_train[xi];
        Ok(row.iter().map(|a| 2.0 * a * resid).collect())
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn lipschitz(&self) -> &LipschitzInfo {
        &self.lip
    }

    /// Blending starts from the zero coefficient vector.
    fn initial_point(&self, _seed: u64) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn eval_mean(&self, x: &[f64]) -> Result<f64> {
        check_point(self, x)?;
        let mut acc = 0.0;
        for (row, target) in self.a_train.iter().zip(&self.r_train) {
            let pred: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            let d = pred - target;
            acc += d * d;
        }
        Ok(acc / self.a_train.len() as f64)
    }

    fn grad_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(self, x)?;
        let mut acc = vec![0.0; self.dim()];
        for (row, target) in self.a_train.iter().zip(&self.r_train) {
            let resid: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - target;
            for (g, a) in acc.iter_mut().zip(row) {
                *g += 2.0 * a * resid;
            }
        }
        let n = self.a_train.len() as f64;
        for g in &mut acc {
            *g /= n;
        }
        Ok(acc)
    }
}

/// Writes a blend problem as headerless CSV: one line per sample, model
/// predictions first, the target as the last column. Training rows come first.
pub fn write_blend_csv(blend: &Blend, mut out: impl Write) -> Result<()> {
    for (row, target) in blend.all_rows() {
        let mut line = String::new();
        for v in row {
            line.push_str(&format!("{v},"));
        }
        line.push_str(&format!("{target}\n"));
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Reads a headerless CSV written by [`write_blend_csv`] (or any matrix in the
/// same layout) and rebuilds the blend problem with the same split rule.
pub fn read_blend_csv(input: impl BufRead) -> Result<Blend> {
    let mut a = Vec::new();
    let mut r = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut values = Vec::new();
        for field in line.split(',') {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?,
            );
        }
        if values.len() < 2 {
            return Err(Error::Parse(format!("line {}: need at least 2 columns", lineno + 1)));
        }
        let target = values.pop().unwrap();
        a.push(values);
        r.push(target);
    }
    Blend::from_parts(a, r)
}
