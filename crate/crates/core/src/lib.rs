//! Design and verification of selective dynamical-decoupling pulse sequences
//! for multilevel quantum systems driven by instantaneous 2pi pulses.
//!
//! The library covers the full pipeline: level-system modeling and the
//! phase-flip pulse operator, pulse-fraction sequences (Uhrig, the exact n=2
//! solution, the closed-form n=4 family), exact Magnus terms for
//! piecewise-constant generators with their scalar order conditions,
//! constraint solvers and sweeps, and an exact-propagator evaluator that
//! measures residual unwanted couplings and their scaling with the total
//! evolution time.

pub mod config;
pub mod error;
pub mod evaluator;
pub mod magnus;
pub mod matrix;
pub mod sequence;
pub mod solver;
pub mod system;

pub use error::{Error, Result};
