//! Entry problems: open a position before the deadline `T`, valuing it by the
//! optimal exit value `V^{i,L}(x) = V^{i,L}(0, x; T′)` net of the entry cost.

use crate::error::{Error, Result};
use crate::exit::{ExitSolution, Position};
use crate::kernels::{terminal_levels, KernelSpec};
use crate::model::{
    classify_degenerate, transition_law, DegeneratePolicy, Interval, MarketSpec, ModelSpec,
    Outcome, Regime, Thresholds,
};
use crate::quadrature::{try_integrate, QuadConfig};
use crate::volterra::{
    represent, residual_report, solve_backward, Boundary, BoundaryEquation, Monotonicity,
    SolverConfig, TimeGrid, TimeQuadrature,
};

/// Reach of the tabulated range from `θ`, in stationary standard deviations.
/// Covers the `± 9 sd` support of the terminal expectation from any start
/// near the mean.
const TABLE_WIDTH_SD: f64 = 12.0;
/// Reach of the γ search bracket from `θ`.
const GAMMA_BRACKET_SD: f64 = 8.0;
/// Default number of table points.
pub const TABLE_POINTS: usize = 2001;

/// `V^{i,L}(0, ·; T′)` tabulated on its continuation region with cubic
/// Hermite interpolation; the stopping region is the exact payoff.
///
/// The value is only C¹ across `b^{i,L}(0)`, so the table ends there.
#[derive(Debug, Clone)]
pub struct ValueTable {
    pub exit: ExitSolution,
    /// `b^{i,L}(0)`.
    pub kink: f64,
    lo: f64,
    hi: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl ValueTable {
    pub fn new(exit: &ExitSolution, points: usize) -> Result<Self> {
        if points < 4 {
            return Err(Error::Argument(format!("value table needs at least 4 points, got {points}")));
        }
        let model = exit.model();
        let kink = exit.boundary.values[0];
        let reach = TABLE_WIDTH_SD * model.scale();
        let space = model.state_space;
        let (lo, hi) = match exit.position() {
            Position::Long => (inner(space, model.theta - reach, true), kink),
            Position::Short => (kink, inner(space, model.theta + reach, false)),
        };
        if !(hi > lo) {
            return Err(Error::Argument(format!("empty value table range [{lo}, {hi}]")));
        }
        let step = (hi - lo) / (points - 1) as f64;
        let values = (0..points)
            .map(|k| exit.value(0.0, lo + k as f64 * step))
            .collect::<Result<Vec<_>>>()?;
        let n = points - 1;
        let mut slopes = vec![0.0; points];
        for k in 1..n {
            slopes[k] = (values[k + 1] - values[k - 1]) / (2.0 * step);
        }
        slopes[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * step);
        slopes[n] = (3.0 * values[n] - 4.0 * values[n - 1] + values[n - 2]) / (2.0 * step);
        Ok(Self {
            exit: exit.clone(),
            kink,
            lo,
            hi,
            step,
            values,
            slopes,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// The same table for another entry deadline. The exit problem does not
    /// see the deadline, so nothing is recomputed.
    pub fn with_deadline(&self, deadline: f64) -> Result<Self> {
        let mut table = self.clone();
        table.exit.equation.market = self.exit.market().with_deadline(deadline)?;
        Ok(table)
    }

    /// `V^{i,L}(0, x)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let payoff = self.exit.equation.payoff(x);
        match self.exit.position() {
            Position::Long if x >= self.kink => return Ok(payoff),
            Position::Short if x <= self.kink => return Ok(payoff),
            _ => {}
        }
        if x < self.lo || x > self.hi {
            return self.exit.value(0.0, x);
        }
        let pos = (x - self.lo) / self.step;
        let k = (pos.floor() as usize).min(self.values.len() - 2);
        let s = pos - k as f64;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(h00 * self.values[k]
            + h10 * self.step * self.slopes[k]
            + h01 * self.values[k + 1]
            + h11 * self.step * self.slopes[k + 1])
    }
}

/// Keep a table endpoint strictly inside the state space.
fn inner(space: Interval, x: f64, lower: bool) -> f64 {
    if lower && space.lower.is_finite() {
        x.max(space.lower + 1e-9 * (1.0 + space.lower.abs()))
    } else if !lower && space.upper.is_finite() {
        x.min(space.upper - 1e-9 * (1.0 + space.upper.abs()))
    } else {
        x
    }
}

/// Outcome of a γ search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSearch {
    Root(f64),
    /// No sign change on the search bracket; `payoff_sign` is the sign of the
    /// entry payoff there.
    NoRoot { payoff_sign: f64 },
}

impl GammaSearch {
    /// The threshold as a level: a payoff that is never positive maps to
    /// `∓∞` so the degenerate classification sees it outside the state space.
    pub fn level(&self, position: Position) -> f64 {
        match (*self, position) {
            (GammaSearch::Root(g), _) => g,
            (GammaSearch::NoRoot { payoff_sign }, Position::Long) => {
                if payoff_sign > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
            (GammaSearch::NoRoot { payoff_sign }, Position::Short) => {
                if payoff_sign > 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Entry payoff without its indicator: `V^{1,L}(x) − x − c` or `x − c − V^{2,L}(x)`.
pub(crate) fn raw_payoff(table: &ValueTable, x: f64) -> Result<f64> {
    let c = table.exit.market().c;
    let v = table.eval(x)?;
    Ok(match table.exit.position() {
        Position::Long => v - x - c,
        Position::Short => x - c - v,
    })
}

/// Bisection for a decreasing (`sign = 1`) or increasing (`sign = −1`) function's root.
pub(crate) fn bisect(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, what: &'static str) -> Result<f64> {
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if (f_lo < 0.0) == (f_hi < 0.0) {
        return Err(Error::NoSignChange { what, lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn find_gamma(table: &ValueTable) -> Result<GammaSearch> {
    let model = table.exit.model();
    let reach = GAMMA_BRACKET_SD * model.scale();
    let (lo, hi) = match table.exit.position() {
        Position::Long => (inner(model.state_space, model.theta - reach, true), table.kink),
        Position::Short => (table.kink, inner(model.state_space, model.theta + reach, false)),
    };
    let f = |x: f64| raw_payoff(table, x);
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if f_lo != 0.0 && f_hi != 0.0 && (f_lo < 0.0) == (f_hi < 0.0) {
        return Ok(GammaSearch::NoRoot { payoff_sign: f_lo.signum() });
    }
    Ok(GammaSearch::Root(bisect(f, lo, hi, "entry payoff")?))
}

/// `γ^{1,L}`: root of `V^{1,L}(x) − x − c` on `[θ − 8 sd, b^{1,L}(0)]`.
pub fn find_gamma_long(table: &ValueTable) -> Result<GammaSearch> {
    if table.exit.position() != Position::Long {
        return Err(Error::Argument("find_gamma_long needs a long exit".into()));
    }
    find_gamma(table)
}

/// `γ^{2,L}`: root of `x − c − V^{2,L}(x)` on `[b^{2,L}(0), θ + 8 sd]`.
pub fn find_gamma_short(table: &ValueTable) -> Result<GammaSearch> {
    if table.exit.position() != Position::Short {
        return Err(Error::Argument("find_gamma_short needs a short exit".into()));
    }
    find_gamma(table)
}

/// `G^{1,E}(x) = (V^{1,L}(x) − x − c) 1{x < γ}` or `G^{2,E}(x) = (x − c − V^{2,L}(x)) 1{x > γ}`.
pub fn entry_payoff(table: &ValueTable, gamma: f64, x: f64) -> Result<f64> {
    let active = match table.exit.position() {
        Position::Long => x < gamma,
        Position::Short => x > gamma,
    };
    if active {
        raw_payoff(table, x)
    } else {
        Ok(0.0)
    }
}

fn terminal_quad_config() -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_intervals: 4000,
    }
}

/// `e^{−r(T−t)} E[G(X_T) | X_t = x]` by adaptive quadrature against the
/// transition density over `mean ± 9 sd`, split at the payoff's kinks.
#[allow(clippy::too_many_arguments)]
pub fn terminal_expectation(
    payoff: &dyn Fn(f64) -> Result<f64>,
    model: &ModelSpec,
    r: f64,
    t: f64,
    x: f64,
    deadline: f64,
    kinks: &[f64],
) -> Result<f64> {
    let s = deadline - t;
    if s <= 0.0 {
        return payoff(x);
    }
    let law = transition_law(model, s, x)?;
    let sd = law.variance().sqrt();
    let lo = (law.mean - 9.0 * sd).max(model.state_space.lower);
    let hi = (law.mean + 9.0 * sd).min(model.state_space.upper);
    let v = try_integrate(|y| Ok(payoff(y)? * law.density(y)), lo, hi, kinks, &terminal_quad_config())?;
    Ok((-r * s).exp() * v)
}

/// The entry boundary equation
/// `lhs(b(t)) = e^{−r(T−t)} E[G(X_T)] + ∫_t^T K(t, u, b(t), b(u)) du`.
#[derive(Debug, Clone)]
pub struct EntryEquation {
    pub table: ValueTable,
    pub gamma: f64,
    pub model: ModelSpec,
    pub market: MarketSpec,
    pub kernel: KernelSpec,
    pub terminal: f64,
}

impl EntryEquation {
    pub fn position(&self) -> Position {
        self.table.exit.position()
    }

    pub fn payoff(&self, x: f64) -> Result<f64> {
        entry_payoff(&self.table, self.gamma, x)
    }
}

impl BoundaryEquation for EntryEquation {
    fn lhs(&self, _t: f64, y: f64) -> Result<f64> {
        raw_payoff(&self.table, y)
    }

    fn terminal_term(&self, t: f64, y: f64) -> Result<f64> {
        let g = |x: f64| self.payoff(x);
        let kinks = [self.gamma, self.table.kink];
        terminal_expectation(&g, &self.model, self.market.r, t, y, self.market.deadline, &kinks)
    }

    fn kernel(&self, t: f64, u: f64, x: f64, z: f64) -> Result<f64> {
        self.kernel.eval(&self.model, t, u, x, z, None)
    }

    fn terminal_value(&self) -> f64 {
        self.terminal
    }

    fn monotonicity(&self) -> Monotonicity {
        match self.position() {
            Position::Long => Monotonicity::Increasing,
            Position::Short => Monotonicity::Decreasing,
        }
    }

    fn state_space(&self) -> Interval {
        self.model.state_space
    }

    fn scale(&self) -> f64 {
        self.model.scale()
    }

    fn preferred_quadrature(&self) -> TimeQuadrature {
        TimeQuadrature::LeftPanel
    }
}

/// A solved entry problem.
#[derive(Debug, Clone)]
pub struct EntrySolution {
    pub equation: EntryEquation,
    /// `b^{1,E}` (long) or `b^{2,E}` (short) over `[0, T]`.
    pub boundary: Boundary,
}

impl EntrySolution {
    pub fn position(&self) -> Position {
        self.equation.position()
    }

    pub fn gamma(&self) -> f64 {
        self.equation.gamma
    }

    pub fn exit(&self) -> &ExitSolution {
        &self.equation.table.exit
    }

    pub fn in_entry_region(&self, t: f64, x: f64) -> bool {
        if t >= self.equation.market.deadline {
            return self.equation.payoff(x).map(|g| g > 0.0).unwrap_or(false);
        }
        let b = self.boundary.at(t);
        match self.position() {
            Position::Long => x <= b,
            Position::Short => x >= b,
        }
    }

    /// `V^{i,E}(t, x)`: the payoff on the entry region, otherwise the
    /// representation, floored at the payoff.
    pub fn value(&self, t: f64, x: f64) -> Result<f64> {
        self.equation.model.check_state(x)?;
        let payoff = self.equation.payoff(x)?;
        if t >= self.equation.market.deadline || self.in_entry_region(t, x) {
            return Ok(payoff);
        }
        Ok(represent(&self.equation, &self.boundary, t.max(0.0), x)?.max(payoff))
    }

    pub fn residuals(&self, rule: TimeQuadrature) -> Result<Vec<(usize, f64)>> {
        residual_report(&self.equation, &self.boundary, rule)
    }
}

fn solve_entry(table: &ValueTable, grid: &TimeGrid, cfg: &SolverConfig) -> Result<Outcome<EntrySolution>> {
    let position = table.exit.position();
    let model = *table.exit.model();
    let market = *table.exit.market();
    let search = find_gamma(table)?;
    let gamma = search.level(position);
    let thresholds = match position {
        Position::Long => Thresholds {
            gamma_long: Some(gamma),
            ..Thresholds::default()
        },
        Position::Short => Thresholds {
            gamma_short: Some(gamma),
            ..Thresholds::default()
        },
    };
    let problem = position.entry_problem();
    let regime = classify_degenerate(problem, &model, &market, &thresholds)?;
    if regime != Regime::NonDegenerate {
        return Ok(Outcome::Degenerate(DegeneratePolicy { problem, regime }));
    }
    if (grid.horizon - market.deadline).abs() > 1e-12 * market.deadline.max(1.0) {
        return Err(Error::Argument(format!(
            "entry grid horizon {} differs from the deadline {}",
            grid.horizon, market.deadline
        )));
    }
    let equation = EntryEquation {
        table: table.clone(),
        gamma,
        model,
        market,
        kernel: KernelSpec::for_problem(problem, &model, &market, &thresholds)?,
        terminal: terminal_levels(problem, &model, &market, &thresholds)?.0,
    };
    let boundary = solve_backward(&equation, grid, cfg)?;
    Ok(Outcome::Solved(EntrySolution { equation, boundary }))
}

/// Long-short entry boundary `b^{1,E}`, increasing with `b^{1,E}(T−) = γ^{1,L} ∧ x_*`.
pub fn solve_entry_long(table: &ValueTable, grid: &TimeGrid, cfg: &SolverConfig) -> Result<Outcome<EntrySolution>> {
    if table.exit.position() != Position::Long {
        return Err(Error::Argument("solve_entry_long needs the long exit table".into()));
    }
    solve_entry(table, grid, cfg)
}

/// Short-long entry boundary `b^{2,E}`, decreasing with `b^{2,E}(T−) = γ^{2,L} ∨ x*`.
pub fn solve_entry_short(table: &ValueTable, grid: &TimeGrid, cfg: &SolverConfig) -> Result<Outcome<EntrySolution>> {
    if table.exit.position() != Position::Short {
        return Err(Error::Argument("solve_entry_short needs the short exit table".into()));
    }
    solve_entry(table, grid, cfg)
}
