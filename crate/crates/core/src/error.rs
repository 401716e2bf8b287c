use thiserror::Error;

use crate::model::{Family, Problem, Regime};

/// Errors raised by the solvers, oracles and configuration layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state {value} lies outside the state space ({lower}, {upper})")]
    Domain { value: f64, lower: f64, upper: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no closed-form transition law for the {0:?} family")]
    UnsupportedLaw(Family),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("missing threshold `{0}` for this problem")]
    MissingThreshold(&'static str),

    #[error(
        "no sign change bracketing the boundary at node {node} (t = {t}): \
         f({lo}) = {f_lo:e}, f({hi}) = {f_hi:e}"
    )]
    Bracket {
        node: usize,
        t: f64,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("node {node} (t = {t}) did not converge after {iters} iterations (residual {residual:e})")]
    Convergence {
        node: usize,
        t: f64,
        iters: usize,
        residual: f64,
    },

    #[error("boundary violates its monotonicity at node {node}: {prev} -> {next}")]
    NotMonotone { node: usize, prev: f64, next: f64 },

    #[error("lower boundary {lower} crossed upper boundary {upper} at node {node}")]
    Crossing { node: usize, lower: f64, upper: f64 },

    #[error("no sign change for {what} on [{lo}, {hi}]")]
    NoSignChange { what: &'static str, lo: f64, hi: f64 },

    #[error("quadrature did not reach tolerance on [{lo}, {hi}] (error estimate {estimate:e})")]
    Quadrature { lo: f64, hi: f64, estimate: f64 },

    #[error("PSOR did not converge at time step {step} after {iters} sweeps")]
    Psor { step: usize, iters: usize },

    #[error("{problem:?} is degenerate ({regime:?}); no boundary to solve")]
    Degenerate { problem: Problem, regime: Regime },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of an iterative numerical method (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Bracket { .. }
                | Error::Convergence { .. }
                | Error::NotMonotone { .. }
                | Error::Crossing { .. }
                | Error::NoSignChange { .. }
                | Error::Quadrature { .. }
                | Error::Psor { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
