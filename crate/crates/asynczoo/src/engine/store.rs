//! Shared parameter vector with per-coordinate atomic access.
//!
//! Coordinates are f64 values stored as bit patterns in `AtomicU64`, so every
//! individual read and write is untorn and updates are applied with
//! compare-and-swap loops — no locks anywhere on the update path.
//!
//! Two read disciplines are offered:
//!
//! * **Inconsistent**: plain coordinate-by-coordinate loads. The resulting
//!   vector may mix ages, but each coordinate is some committed value.
//! * **Consistent**: a validated snapshot. Writers bump a `begun` counter
//!   before touching coordinates and an `applied` counter after; a reader
//!   copies the vector only while the two counters agree and retries if a
//!   write began in the meantime. Because updates are additive, any interval
//!   with no write in flight holds exactly the state after `applied` updates,
//!   so the snapshot equals a real historical iterate.

use crate::error::{Error, Result};
use crate::zeroth_order::SparseGradEstimate;
use std::sync::atomic::{AtomicU64, Ordering};

/// An f64 with atomic load/store/fetch-update, bit-cast over `AtomicU64`.
#[derive(Debug)]
pub struct AtomicF64 {
    bits: AtomicU64,
}

impl AtomicF64 {
    pub fn new(v: f64) -> Self {
        AtomicF64 { bits: AtomicU64::new(v.to_bits()) }
    }

    #[inline]
    pub fn load(&self, order: Ordering) -> f64 {
        f64::from_bits(self.bits.load(order))
    }

    #[inline]
    pub fn store(&self, v: f64, order: Ordering) {
        self.bits.store(v.to_bits(), order);
    }

    /// Atomically subtracts `d`, returning the previous value.
    #[inline]
    pub fn fetch_sub(&self, d: f64) -> f64 {
        let mut old = self.bits.load(Ordering::Relaxed);
        loop {
            let new = (f64::from_bits(old) - d).to_bits();
            match self
                .bits
                .compare_exchange_weak(old, new, Ordering::SeqCst, Ordering::Relaxed)
            {
                Ok(prev) => return f64::from_bits(prev),
                Err(cur) => old = cur,
            }
        }
    }
}

/// Read discipline of a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadMode {
    Consistent,
    Inconsistent,
}

/// The shared optimization variable plus the global update counter.
#[derive(Debug)]
pub struct ParamStore {
    coords: Vec<AtomicF64>,
    begun: AtomicU64,
    applied: AtomicU64,
    mode: ReadMode,
}

impl ParamStore {
    pub fn new(x0: &[f64], mode: ReadMode) -> Self {
        ParamStore {
            coords: x0.iter().map(|&v| AtomicF64::new(v)).collect(),
            begun: AtomicU64::new(0),
            applied: AtomicU64::new(0),
            mode,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn mode(&self) -> ReadMode {
        self.mode
    }

    /// Number of fully applied updates so far.
    pub fn counter(&self) -> u64 {
        self.applied.load(Ordering::SeqCst)
    }

    /// Applies `x_i <- x_i - gamma * v_i` for every entry of the estimate and
    /// then advances the update counter. Returns this update's 1-based index.
    pub fn apply_update(&self, estimate: &SparseGradEstimate, gamma: f64) -> Result<u64> {
        if let Some(&last) = estimate.indices().last() {
            if last >= self.coords.len() {
                return Err(Error::IndexOutOfRange { index: last, limit: self.coords.len() });
            }
        }
        self.begun.fetch_add(1, Ordering::SeqCst);
        for (i, v) in estimate.iter() {
            self.coords[i].fetch_sub(gamma * v);
        }
        Ok(self.applied.fetch_add(1, Ordering::SeqCst) + 1)
    }

    /// Coordinate-by-coordinate read; entries may have different ages.
    pub fn read_inconsistent_into(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.coords.len());
        for (o, c) in out.iter_mut().zip(&self.coords) {
            *o = c.load(Ordering::SeqCst);
        }
    }

    pub fn read_inconsistent(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.coords.len()];
        self.read_inconsistent_into(&mut out);
        out
    }

    /// Validated snapshot: retries until a copy completes with no write in
    /// flight. Returns the update count the snapshot corresponds to.
    pub fn read_consistent_into(&self, out: &mut [f64]) -> u64 {
        assert_eq!(out.len(), self.coords.len());
        let mut spins = 0u32;
        loop {
            let begun = self.begun.load(Ordering::SeqCst);
            let applied = self.applied.load(Ordering::SeqCst);
            if begun != applied {
                backoff(&mut spins);
                continue;
            }
            for (o, c) in out.iter_mut().zip(&self.coords) {
                *o = c.load(Ordering::SeqCst);
            }
            if self.begun.load(Ordering::SeqCst) == begun {
                return applied;
            }
            backoff(&mut spins);
        }
    }

    pub fn read_consistent(&self) -> (Vec<f64>, u64) {
        let mut out = vec![0.0; self.coords.len()];
        let k = self.read_consistent_into(&mut out);
        (out, k)
    }

    /// Snapshot obeying the store's read mode; the inconsistent flavor is
    /// best-effort and only suitable for trace purposes.
    pub fn snapshot(&self) -> Vec<f64> {
        match self.mode {
            ReadMode::Consistent => self.read_consistent().0,
            ReadMode::Inconsistent => self.read_inconsistent(),
        }
    }
}

fn backoff(spins: &mut u32) {
    *spins += 1;
    if *spins % 1024 == 0 {
        std::thread::yield_now();
    } else {
        std::hint::spin_loop();
    }
}
