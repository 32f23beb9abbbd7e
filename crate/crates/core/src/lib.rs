//! Bayesian-model-averaged particle filtering (BMAPF) with a data-driven,
//! Bayesian-optimization based design of the model set.
//!
//! The crate is organised bottom-up:
//!
//! - [`models`]: state-space model abstraction and the benchmark models.
//! - [`smc`]: bootstrap particle filter primitives and the evidence estimate.
//! - [`bmapf`]: the K-model averaged filter.
//! - [`gp`] and [`bo`]: Gaussian-process surrogate and GP-UCB optimizer.
//! - [`bomsd`]: model-set design over nested observation prefixes.
//! - [`bench`]: simulation studies, MSE and the Kalman evidence oracle.
//! - [`cli`]: the `bmapf` command-line driver.
//!
//! Data-parallel loops (per-model blocks, BO runs, benchmark repetitions) use
//! rayon when the `parallel` feature is enabled and fall back to plain
//! iterators otherwise. Every random draw comes from a stream derived from a
//! root seed and a fixed key path, so outputs do not depend on the schedule.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bmapf;
pub mod bo;
pub mod bomsd;
pub mod cli;
pub mod error;
pub mod gp;
pub mod io;
pub mod models;
pub mod par;
pub mod rng;
pub mod smc;
pub mod stats;

pub use error::{Error, Result};
