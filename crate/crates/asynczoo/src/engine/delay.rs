//! Delay models for the deterministic simulator.
//!
//! A delay model decides, for each step `k`, which of the `T` most recent
//! updates the read misses. The missing set `J(k)` is always a subset of
//! `{k-1, ..., k-T}`, so reconstructing `x_k` minus the missed updates yields
//! a read of bounded age.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub enum DelayModel {
    /// No updates are ever missed: reads are perfectly fresh.
    None,
    /// Every read misses exactly the last `tau` updates (clipped at the
    /// start of the run), i.e. sees the state from `tau` steps ago.
    Fixed { tau: usize },
    /// Every read misses the last `tau_k` updates with `tau_k` drawn
    /// uniformly from `{0, ..., t}`.
    Uniform { t: usize },
    /// Explicit missing sets per step; steps beyond the trace miss nothing.
    /// `t` declares the age bound the sets are validated against.
    Trace { t: usize, sets: Vec<Vec<usize>> },
}

impl DelayModel {
    /// The staleness bound this model respects.
    pub fn max_age(&self) -> usize {
        match self {
            DelayModel::None => 0,
            DelayModel::Fixed { tau } => *tau,
            DelayModel::Uniform { t } => *t,
            DelayModel::Trace { t, .. } => *t,
        }
    }

    /// Writes the missing set `J(k)` (ascending iteration indices) into `out`.
    pub fn missing_set(&self, k: usize, rng: &mut ChaCha8Rng, out: &mut Vec<usize>) -> Result<()> {
        out.clear();
        match self {
            DelayModel::None => {}
            DelayModel::Fixed { tau } => {
                out.extend(k.saturating_sub(*tau)..k);
            }
            DelayModel::Uniform { t } => {
                let tau = rng.gen_range(0..=*t);
                out.extend(k.saturating_sub(tau)..k);
            }
            DelayModel::Trace { t, sets } => {
                if let Some(set) = sets.get(k) {
                    out.extend_from_slice(set);
                    out.sort_unstable();
                    out.dedup();
                    if out.len() > *t {
                        return Err(Error::validation(format!(
                            "missing set at step {k} has {} entries, bound is {t}",
                            out.len()
                        )));
                    }
                    for &j in out.iter() {
                        if j >= k || k - j > *t {
                            return Err(Error::validation(format!(
                                "missing index {j} at step {k} violates the age bound {t}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
