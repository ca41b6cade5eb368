//! Two-channel polarizer Bell test toolkit.
//!
//! * [`geometry`]: angles, solid angle and the cascade angular correlation.
//! * [`qm_model`]: quantum predictions for singles and coincidences.
//! * [`bell_expressions`]: the singles and ratio inequalities, CHSH.
//! * [`lhv`]: the bilinear lemma behind the local bound and the vertex sweep.
//! * [`simulator`]: seeded Monte Carlo counts and the bootstrap estimate.
//! * [`optimizer`]: grid plus coordinate-descent search over analyzer angles.
//! * [`cli`]: the `twochannel-bell` command line.

pub mod bell_expressions;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod lhv;
pub mod optimizer;
pub mod qm_model;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use geometry::{Angle, DetectionGeometry};
pub use qm_model::{ExperimentConfig, Outcome, Settings};
