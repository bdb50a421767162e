//! Estimation and sensing-control primitives for controllable nonlinear
//! measurement systems `z = H(u, p) + v(u, p)`.
//!
//! The crate covers static-parameter Kalman and extended Kalman filtering,
//! finite-prior (grid) Bayes estimation, iterative interval refinement,
//! a discretized minimax linearization game, batch-size driven sensor
//! control and a 2-D orthographic camera model.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod error;
pub mod game;
pub mod grid;
pub mod iterative;
pub mod kalman;
pub mod model;
pub mod planner;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
