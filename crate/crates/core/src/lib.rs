//! Simulation and estimation toolkit for the fractional Gompertz diffusion
//! `dX = (alpha X - beta X ln X) dt + sigma X dB^H`.
//!
//! Paths come from exact fBm sampling pushed through the explicit solution.
//! The estimators in [`hurst`] and [`diffusion`] are checked against the
//! limit variances in [`theory`], and [`harness`] runs seeded Monte Carlo
//! studies over them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod error;
pub mod fgn;
pub mod gompertz;
pub mod harness;
pub mod hurst;
pub mod io;
pub mod numeric;
pub mod rng;
pub mod theory;
pub mod variation;

pub use error::{FgdError, Result};
pub use fgn::{FbmPath, GridSpec, HurstIndex};
pub use gompertz::{GompertzParams, ProcessPath, Subsample};
pub use hurst::{Convention, HurstEstimate, RatioSchedule};
