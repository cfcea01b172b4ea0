//! Localization from a single compact UWB receiver array.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: positions, rooms, anchor-array constructors and evaluation grids.
//! - [`measurement`]: expected TDoA/PDoA/TWR/AoA models, noise synthesis and the
//!   oscillator jitter budget.
//! - [`calibration`]: the per-anchor `α + β·d^γ` phase-bias model and its fit.
//! - [`estimator`]: the joint TDoA+PDoA likelihood, the brute-force grid oracle,
//!   a refined grid locator and the adaptive particle filter.
//! - [`baselines`]: TWR, TDoA-only, AoA-only and fused least-squares localizers.
//! - [`solver`]: the damped Gauss–Newton scaffold shared by the least-squares code.

pub mod baselines;
pub mod calibration;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod measurement;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{AnchorArray, Direction, Environment, EvalGrid, Position};
