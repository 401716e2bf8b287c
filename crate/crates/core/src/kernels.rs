//! Discounted truncated-expectation kernels
//! `K(t, u, x, z) = −e^{−r(u−t)} E[H(X_u) 1{X_u ∈ R(z)} | X_t = x]`
//! for piecewise-affine integrands `H`.

use crate::error::{Error, Result};
use crate::model::{
    critical_levels, transition_law, truncated_affine_expectation, MarketSpec, ModelSpec,
    Problem, Side, Thresholds, TransitionLaw,
};

/// `(a0 + a1·x)` on the open interval `(lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePiece {
    pub a0: f64,
    pub a1: f64,
    pub lower: f64,
    pub upper: f64,
}

impl AffinePiece {
    pub fn eval(&self, x: f64) -> f64 {
        if x > self.lower && x < self.upper {
            self.a0 + self.a1 * x
        } else {
            0.0
        }
    }

    /// Zero of the affine part (ignoring the interval).
    pub fn root(&self) -> f64 {
        -self.a0 / self.a1
    }
}

/// `H(x) = Σ (a0 + a1·x) 1{lower < x < upper}` with discount rate `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrandSpec {
    pub pieces: Vec<AffinePiece>,
    pub r: f64,
}

impl IntegrandSpec {
    pub fn eval(&self, x: f64) -> f64 {
        self.pieces.iter().map(|p| p.eval(x)).sum()
    }
}

/// Region kept by the kernel's indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// `X >= z`
    AboveZ,
    /// `X <= z`
    BelowZ,
    /// `X <= z` or `X >= z̃`
    OutsidePair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub integrand: IntegrandSpec,
    pub truncation: Truncation,
}

impl KernelSpec {
    /// Kernel of the given problem with its natural truncation.
    pub fn for_problem(problem: Problem, model: &ModelSpec, market: &MarketSpec, thresholds: &Thresholds) -> Result<Self> {
        let truncation = match problem {
            Problem::ExitLong | Problem::EntryShort => Truncation::AboveZ,
            Problem::ExitShort | Problem::EntryLong => Truncation::BelowZ,
            Problem::Chooser => Truncation::OutsidePair,
        };
        Ok(Self {
            integrand: make_integrand(problem, model, market, thresholds)?,
            truncation,
        })
    }

    /// `K(t, u, x, z[, z̃])`; see [`eval_kernel`].
    pub fn eval(&self, model: &ModelSpec, t: f64, u: f64, x: f64, z: f64, z2: Option<f64>) -> Result<f64> {
        eval_kernel(self, model, t, u, x, z, z2)
    }

    /// Kernel against an already-built transition law.
    pub fn eval_with_law(&self, law: &TransitionLaw, z: f64, z2: Option<f64>) -> Result<f64> {
        let regions = self.regions(z, z2)?;
        let mut acc = 0.0;
        for piece in &self.integrand.pieces {
            for &(lo, hi) in regions.iter().flatten() {
                acc += interval_expectation(law, piece, lo, hi);
            }
        }
        Ok(-(-self.integrand.r * law.s).exp() * acc)
    }

    fn regions(&self, z: f64, z2: Option<f64>) -> Result<[Option<(f64, f64)>; 2]> {
        const INF: f64 = f64::INFINITY;
        Ok(match self.truncation {
            Truncation::AboveZ => [Some((z, INF)), None],
            Truncation::BelowZ => [Some((-INF, z)), None],
            Truncation::OutsidePair => {
                let z2 = z2.ok_or_else(|| Error::Argument("outside-pair truncation needs a second level".into()))?;
                if z > z2 {
                    return Err(Error::Argument(format!("truncation pair out of order: {z} > {z2}")));
                }
                [Some((-INF, z)), Some((z2, INF))]
            }
        })
    }
}

/// `E[(a0 + a1 X) 1{X in piece ∩ [lo, hi]}]`, with infinite ends handled
/// through a single tail so no cancellation occurs.
fn interval_expectation(law: &TransitionLaw, piece: &AffinePiece, lo: f64, hi: f64) -> f64 {
    let lo = lo.max(piece.lower);
    let hi = hi.min(piece.upper);
    if lo >= hi {
        return 0.0;
    }
    let (a0, a1) = (piece.a0, piece.a1);
    if hi == f64::INFINITY {
        truncated_affine_expectation(law, a0, a1, lo, Side::Above)
    } else if lo == f64::NEG_INFINITY {
        truncated_affine_expectation(law, a0, a1, hi, Side::Below)
    } else {
        truncated_affine_expectation(law, a0, a1, hi, Side::Below)
            - truncated_affine_expectation(law, a0, a1, lo, Side::Below)
    }
}

/// Integrand `H = (𝓛 − r)G` of a stopping problem on its payoff region.
///
/// The chooser's short-side piece is `−(μ+r)x + μθ + rc`, the generator
/// applied to `x − c − V^{2,L}(x)` where `V^{2,L}` is harmonic.
pub fn make_integrand(problem: Problem, model: &ModelSpec, market: &MarketSpec, thresholds: &Thresholds) -> Result<IntegrandSpec> {
    let (mu, theta) = (model.mu, model.theta);
    let (r, c) = (market.r, market.c);
    let (a, b) = (model.state_space.lower, model.state_space.upper);
    let k = mu + r;
    let long_entry = |upper: f64| AffinePiece {
        a0: -mu * theta + r * c,
        a1: k,
        lower: a,
        upper: upper.min(b),
    };
    let short_entry = |lower: f64| AffinePiece {
        a0: mu * theta + r * c,
        a1: -k,
        lower: lower.max(a),
        upper: b,
    };
    let gamma_long = || thresholds.gamma_long.ok_or(Error::MissingThreshold("gamma_long"));
    let gamma_short = || thresholds.gamma_short.ok_or(Error::MissingThreshold("gamma_short"));
    let pieces = match problem {
        Problem::ExitLong => vec![AffinePiece {
            a0: mu * theta + r * c,
            a1: -k,
            lower: a,
            upper: b,
        }],
        Problem::ExitShort => vec![AffinePiece {
            a0: mu * theta - r * c,
            a1: -k,
            lower: a,
            upper: b,
        }],
        Problem::EntryLong => vec![long_entry(gamma_long()?)],
        Problem::EntryShort => vec![short_entry(gamma_short()?)],
        Problem::Chooser => {
            let m = thresholds.m.ok_or(Error::MissingThreshold("m"))?;
            vec![long_entry(m.min(gamma_long()?)), short_entry(m.max(gamma_short()?))]
        }
    };
    Ok(IntegrandSpec { pieces, r })
}

/// `−e^{−r(u−t)} E[H(X_u) 1{X_u ∈ R}]` given `X_t = x`.
///
/// At `u = t` the law is a point mass at `x`, and a point mass sitting exactly
/// on a truncation level counts one half, the `u ↓ t` limit of a diffusion.
pub fn eval_kernel(spec: &KernelSpec, model: &ModelSpec, t: f64, u: f64, x: f64, z: f64, z2: Option<f64>) -> Result<f64> {
    if u < t {
        return Err(Error::Argument(format!("kernel needs u >= t, got t = {t}, u = {u}")));
    }
    let law = transition_law(model, u - t, x)?;
    spec.eval_with_law(&law, z, z2)
}

/// Terminal value of the boundary for a stopping problem: the root of its
/// integrand clipped by the payoff thresholds.
pub fn terminal_levels(problem: Problem, model: &ModelSpec, market: &MarketSpec, thresholds: &Thresholds) -> Result<(f64, Option<f64>)> {
    let lv = critical_levels(model, market);
    let gamma_long = || thresholds.gamma_long.ok_or(Error::MissingThreshold("gamma_long"));
    let gamma_short = || thresholds.gamma_short.ok_or(Error::MissingThreshold("gamma_short"));
    Ok(match problem {
        Problem::ExitLong => (lv.upper, None),
        Problem::ExitShort => (lv.lower, None),
        Problem::EntryLong => (gamma_long()?.min(lv.lower), None),
        Problem::EntryShort => (gamma_short()?.max(lv.upper), None),
        Problem::Chooser => {
            let m = thresholds.m.ok_or(Error::MissingThreshold("m"))?;
            (m.min(gamma_long()?).min(lv.lower), Some(m.max(gamma_short()?).max(lv.upper)))
        }
    })
}
