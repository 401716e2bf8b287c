//! Mean-reverting diffusions `dX = μ(θ − X) dt + σ(X) dB`.
//!
//! The four supported families share the affine drift and differ in the
//! diffusion coefficient and state space:
//!
//! | family | σ(x)                              | state space |
//! |--------|-----------------------------------|-------------|
//! | OU     | σ                                 | (−∞, ∞)     |
//! | CIR    | σ √x                              | (0, ∞)      |
//! | IGBM   | σ x                               | (0, ∞)      |
//! | Jacobi | σ √((x−a)(b−x)) / (√b − √a)       | (a, b)      |
//!
//! Only OU and CIR have closed-form transition laws; IGBM and Jacobi are
//! supported by the finite-difference and simulation paths.

mod law;
pub mod special;

pub use law::{
    sample_transition, transition_law, truncated_affine_expectation, LawKind, Side,
    TransitionLaw,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diffusion family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ou,
    Cir,
    Igbm,
    Jacobi,
}

/// Open interval `(lower, upper)` of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub const POSITIVE: Interval = Interval {
        lower: 0.0,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::InvalidParameter(format!(
                "interval ({lower}, {upper}) is empty"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    /// Membership in the closure `[lower, upper]`.
    pub fn contains_closed(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

/// A mean-reverting diffusion model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    /// Speed of mean reversion μ.
    pub mu: f64,
    /// Long-run mean θ.
    pub theta: f64,
    /// Volatility scale σ (meaning depends on the family).
    pub sigma: f64,
    pub state_space: Interval,
}

impl ModelSpec {
    pub fn ou(mu: f64, theta: f64, sigma: f64) -> Result<Self> {
        Self::build(Family::Ou, mu, theta, sigma, Interval::REAL_LINE)
    }

    /// CIR model; rejected unless the Feller condition `2μθ ≥ σ²` holds.
    pub fn cir(mu: f64, theta: f64, sigma: f64) -> Result<Self> {
        if 2.0 * mu * theta < sigma * sigma {
            return Err(Error::InvalidParameter(format!(
                "CIR parameters violate the Feller condition: 2·μ·θ = {} < σ² = {}",
                2.0 * mu * theta,
                sigma * sigma
            )));
        }
        Self::build(Family::Cir, mu, theta, sigma, Interval::POSITIVE)
    }

    pub fn igbm(mu: f64, theta: f64, sigma: f64) -> Result<Self> {
        Self::build(Family::Igbm, mu, theta, sigma, Interval::POSITIVE)
    }

    pub fn jacobi(mu: f64, theta: f64, sigma: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Jacobi bounds must be finite with 0 <= a < b, got ({lower}, {upper})"
            )));
        }
        Self::build(Family::Jacobi, mu, theta, sigma, Interval::new(lower, upper)?)
    }

    /// Dispatch on the family; `bounds` is only read for Jacobi.
    pub fn new(family: Family, mu: f64, theta: f64, sigma: f64, bounds: Option<(f64, f64)>) -> Result<Self> {
        match family {
            Family::Ou => Self::ou(mu, theta, sigma),
            Family::Cir => Self::cir(mu, theta, sigma),
            Family::Igbm => Self::igbm(mu, theta, sigma),
            Family::Jacobi => {
                let (a, b) = bounds.ok_or_else(|| {
                    Error::InvalidParameter("Jacobi model needs lower and upper bounds".into())
                })?;
                Self::jacobi(mu, theta, sigma, a, b)
            }
        }
    }

    fn build(family: Family, mu: f64, theta: f64, sigma: f64, state_space: Interval) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if !state_space.contains(theta) {
            return Err(Error::InvalidParameter(format!(
                "theta = {theta} is not inside the state space ({}, {})",
                state_space.lower, state_space.upper
            )));
        }
        Ok(Self {
            family,
            mu,
            theta,
            sigma,
            state_space,
        })
    }

    /// Same model with a different volatility scale.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        let bounds = Some((self.state_space.lower, self.state_space.upper));
        Self::new(self.family, self.mu, self.theta, sigma, bounds)
    }

    pub fn drift(&self, x: f64) -> f64 {
        self.mu * (self.theta - x)
    }

    /// Diffusion coefficient σ(x).
    pub fn diffusion(&self, x: f64) -> f64 {
        match self.family {
            Family::Ou => self.sigma,
            Family::Cir => self.sigma * x.max(0.0).sqrt(),
            Family::Igbm => self.sigma * x,
            Family::Jacobi => {
                let Interval { lower: a, upper: b } = self.state_space;
                let v = ((x - a) * (b - x)).max(0.0);
                self.sigma * v.sqrt() / (b.sqrt() - a.sqrt())
            }
        }
    }

    /// Stationary standard deviation of the OU process with the volatility
    /// frozen at θ; the natural spatial scale for brackets and grids.
    pub fn scale(&self) -> f64 {
        self.diffusion(self.theta) / (2.0 * self.mu).sqrt()
    }

    pub fn check_state(&self, x: f64) -> Result<()> {
        if self.state_space.contains_closed(x) && !x.is_nan() {
            Ok(())
        } else {
            Err(Error::Domain {
                value: x,
                lower: self.state_space.lower,
                upper: self.state_space.upper,
            })
        }
    }
}

/// Discount rate, transaction cost and the two deadlines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketSpec {
    pub r: f64,
    pub c: f64,
    /// Entry deadline T.
    pub deadline: f64,
    /// Exit window length T′, counted from the entry time.
    pub window: f64,
}

impl MarketSpec {
    pub fn new(r: f64, c: f64, deadline: f64, window: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("r must be >= 0, got {r}")));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("c must be >= 0, got {c}")));
        }
        if !(deadline > 0.0 && deadline.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be > 0, got {deadline}")));
        }
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::InvalidParameter(format!("T' must be > 0, got {window}")));
        }
        Ok(Self {
            r,
            c,
            deadline,
            window,
        })
    }

    pub fn with_deadline(&self, deadline: f64) -> Result<Self> {
        Self::new(self.r, self.c, deadline, self.window)
    }

    pub fn with_window(&self, window: f64) -> Result<Self> {
        Self::new(self.r, self.c, self.deadline, window)
    }

    pub fn with_cost(&self, c: f64) -> Result<Self> {
        Self::new(self.r, c, self.deadline, self.window)
    }
}

/// `m(s, x) = x e^{−μs} + θ (1 − e^{−μs})`, the conditional mean of `X_{t+s}` given `X_t = x`.
pub fn mean_m(model: &ModelSpec, s: f64, x: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Argument(format!("elapsed time must be >= 0, got {s}")));
    }
    model.check_state(x)?;
    Ok(mean_unchecked(model, s, x))
}

pub(crate) fn mean_unchecked(model: &ModelSpec, s: f64, x: f64) -> f64 {
    let e = (-model.mu * s).exp();
    x * e + model.theta * (1.0 - e)
}

/// Roots of the exit integrands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalLevels {
    /// `x* = (μθ + rc)/(μ + r)`: terminal exit-long level.
    pub upper: f64,
    /// `x_* = (μθ − rc)/(μ + r)`: terminal exit-short level.
    pub lower: f64,
}

pub fn critical_levels(model: &ModelSpec, market: &MarketSpec) -> CriticalLevels {
    let (mu, r, c) = (model.mu, market.r, market.c);
    CriticalLevels {
        upper: (mu * model.theta + r * c) / (mu + r),
        lower: (mu * model.theta - r * c) / (mu + r),
    }
}

/// The five stopping problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    ExitLong,
    ExitShort,
    EntryLong,
    EntryShort,
    Chooser,
}

impl Problem {
    pub const ALL: [Problem; 5] = [
        Problem::ExitLong,
        Problem::ExitShort,
        Problem::EntryLong,
        Problem::EntryShort,
        Problem::Chooser,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Problem::ExitLong => "exit-long",
            Problem::ExitShort => "exit-short",
            Problem::EntryLong => "entry-long",
            Problem::EntryShort => "entry-short",
            Problem::Chooser => "chooser",
        }
    }
}

/// Outcome of the degenerate-case classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    NonDegenerate,
    /// Act at the initial time.
    StopImmediately,
    /// Never act before the deadline.
    WaitUntilDeadline,
}

/// Entry thresholds γ^{1,L}, γ^{2,L} and the chooser crossover m.
///
/// A threshold outside the state space is legal and encodes a degenerate
/// payoff (e.g. `γ^{1,L} = −∞` when the long entry payoff is never positive).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Thresholds {
    pub gamma_long: Option<f64>,
    pub gamma_short: Option<f64>,
    pub m: Option<f64>,
}

/// The trivial policy of a degenerate stopping problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegeneratePolicy {
    pub problem: Problem,
    pub regime: Regime,
}

/// Result of a boundary solve: either a solution or the degenerate policy
/// that made solving unnecessary.
#[derive(Debug, Clone)]
pub enum Outcome<T> {
    Solved(T),
    Degenerate(DegeneratePolicy),
}

impl<T> Outcome<T> {
    pub fn solved(self) -> Option<T> {
        match self {
            Outcome::Solved(s) => Some(s),
            Outcome::Degenerate(_) => None,
        }
    }

    /// The solution, or [`Error::Degenerate`].
    pub fn into_solution(self) -> Result<T> {
        match self {
            Outcome::Solved(s) => Ok(s),
            Outcome::Degenerate(p) => Err(Error::Degenerate {
                problem: p.problem,
                regime: p.regime,
            }),
        }
    }

    pub fn degenerate(&self) -> Option<DegeneratePolicy> {
        match self {
            Outcome::Solved(_) => None,
            Outcome::Degenerate(p) => Some(*p),
        }
    }
}

fn classify_level(level: f64, space: &Interval, below_a: Regime, above_b: Regime) -> Regime {
    if level <= space.lower {
        below_a
    } else if level >= space.upper {
        above_b
    } else {
        Regime::NonDegenerate
    }
}

/// Classify whether a stopping problem is trivial because the root of its
/// integrand falls outside the state space.
pub fn classify_degenerate(
    problem: Problem,
    model: &ModelSpec,
    market: &MarketSpec,
    thresholds: &Thresholds,
) -> Result<Regime> {
    use Regime::*;
    let levels = critical_levels(model, market);
    let space = &model.state_space;
    let gamma_long = || thresholds.gamma_long.ok_or(Error::MissingThreshold("gamma_long"));
    let gamma_short = || thresholds.gamma_short.ok_or(Error::MissingThreshold("gamma_short"));
    Ok(match problem {
        Problem::ExitLong => classify_level(levels.upper, space, StopImmediately, WaitUntilDeadline),
        Problem::ExitShort => classify_level(levels.lower, space, WaitUntilDeadline, StopImmediately),
        Problem::EntryLong => {
            let k = levels.lower.min(gamma_long()?);
            classify_level(k, space, WaitUntilDeadline, StopImmediately)
        }
        Problem::EntryShort => {
            let k = levels.upper.max(gamma_short()?);
            classify_level(k, space, StopImmediately, WaitUntilDeadline)
        }
        Problem::Chooser => {
            let m = thresholds.m.ok_or(Error::MissingThreshold("m"))?;
            let low = m.min(gamma_long()?).min(levels.lower);
            let high = m.max(gamma_short()?).max(levels.upper);
            let lower_side = classify_level(low, space, WaitUntilDeadline, StopImmediately);
            let upper_side = classify_level(high, space, StopImmediately, WaitUntilDeadline);
            let all_inside = [m, gamma_long()?, gamma_short()?]
                .iter()
                .all(|&v| space.contains(v));
            match (lower_side, upper_side) {
                (NonDegenerate, NonDegenerate) if all_inside => NonDegenerate,
                (NonDegenerate, NonDegenerate) => WaitUntilDeadline,
                (StopImmediately, _) | (_, StopImmediately) => StopImmediately,
                (WaitUntilDeadline, _) | (_, WaitUntilDeadline) => WaitUntilDeadline,
            }
        }
    })
}
