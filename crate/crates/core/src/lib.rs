//! Simulation laboratory for verifier-backed committee search over ranked
//! task systems.
//!
//! The crate builds synthetic search tasks with ground-truth soundness
//! labels, runs the committee protocol (propose, criticize, compare,
//! advance) with exactly configurable stochastic roles, evaluates the
//! matching analytic error bounds in closed form, and estimates every
//! quantity by Monte Carlo with exact small-instance oracles for
//! cross-checking.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod numeric;
pub mod pool;
pub mod protocol;
pub mod role_models;
pub mod state_system;
pub mod stats;
pub mod streams;

pub use error::{CoreError, Result};
