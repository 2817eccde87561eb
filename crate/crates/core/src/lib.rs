//! Trade-off curves, separation bounds and Monte Carlo audits for DP-SGD
//! under one-epoch random shuffling and Poisson subsampling.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: standard-normal special functions and scalar solvers.
//! * [`tradeoff`]: f-DP trade-off curves and their separation from the
//!   random-guessing line.
//! * [`bounds`]: closed-form separation and epsilon lower bounds.
//! * [`samplers`]: Poisson and shuffle batch plans with addressable RNG streams.
//! * [`adversary_sim`]: Monte Carlo membership tests on the reduced
//!   one-dimensional observation model.
//! * [`dpsgd_toy`]: a small logistic-regression DP-SGD trainer.
//! * [`cli`]: the `sepdp` command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary_sim;
pub mod bounds;
pub mod cli;
pub mod dpsgd_toy;
mod error;
pub mod numerics;
pub mod samplers;
pub mod tradeoff;

pub use error::{Error, Result};
