//! Asynchronous stochastic optimization on lock-free shared memory.
//!
//! One update rule covers stochastic coordinate descent, stochastic gradient
//! descent and zeroth-order descent: at each step a component function `xi`
//! and a coordinate block `S` of size `Y` are sampled, and the shared iterate
//! moves along a scaled block estimate of the stochastic gradient computed at
//! a possibly stale read `xhat`:
//!
//! ```text
//! x_{k+1} = x_k - gamma * G_S(xhat_k; xi_k)
//! ```
//!
//! The crate provides:
//!
//! * [`objective`] — the problem abstraction and built-in test problems
//!   (quadratics, model blending, a noisy black box) with Lipschitz metadata;
//! * [`zeroth_order`] — the coordinate central-difference estimator and the
//!   smoothing operators that certify its bias;
//! * [`stepsize`] — derived constants, the prescribed constant step size, the
//!   staleness ceiling, stability checks, and the convergence-rate bound;
//! * [`engine`] — a deterministic single-threaded simulator with explicit
//!   delay models, and a real multi-threaded engine over a lock-free store;
//! * [`metrics`] — ergodic gradient norms, speedup tables, RMSE;
//! * [`cli`] — the command-line wiring used by the `asynczoo` binary.
//!
//! Start with the `examples/` directory: each example is a runnable tour of
//! one capability.

pub mod cli;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod objective;
pub mod rng;
pub mod stepsize;
pub mod zeroth_order;

pub use engine::{run_async, run_simulated, DelayModel, ParamStore, ReadMode, RunReport};
pub use error::{Error, Result};
pub use objective::{
    estimate_lipschitz, estimate_sigma2, make_blend, make_noisy_blackbox, make_quadratic,
    LipschitzInfo, Problem, Provenance,
};
pub use stepsize::{plan, ProblemMeta, RunConfig, StepPlan, Variant};
pub use zeroth_order::{MuVector, SparseGradEstimate};
