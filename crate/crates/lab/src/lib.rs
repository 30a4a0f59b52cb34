//! Experiment runner for the committee-search simulator: scenario
//! configs, verification grids, the separation experiment, pool
//! ablations, and reproducible CSV outputs.

pub mod commands;
pub mod csvfmt;
pub mod error;
pub mod manifest;
pub mod scenario;
pub mod separation;

pub use error::{LabError, Result};
