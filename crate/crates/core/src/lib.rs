//! Optimal entry and exit boundaries for mean-reverting diffusions with an
//! entry deadline, a fixed-length exit window and fixed transaction costs.
//!
//! The boundaries solve nonlinear Volterra integral equations backward in
//! time. Two independent oracles check them: a Crank–Nicolson/PSOR
//! obstacle-problem solver and a Monte Carlo policy evaluator.

// `!(x > 0.0)` guards are written that way so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chooser;
pub mod config;
pub mod entry;
pub mod error;
pub mod exit;
pub mod kernels;
pub mod model;
pub mod oracles;
pub mod quadrature;
pub mod report;
pub mod sim;
pub mod volterra;

pub use error::{Error, Result};
