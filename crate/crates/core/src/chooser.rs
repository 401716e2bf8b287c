//! The chooser: enter long, enter short, or stay out, with payoff
//! `G^{0,E}(x) = max{V^{1,L}(x) − x − c, x − c − V^{2,L}(x), 0}`.
//!
//! The entry region is `{x ≤ b^{0,E}(t)} ∪ {x ≥ b̃^{0,E}(t)}`; both boundaries
//! come from one coupled pair of integral equations.

use serde::{Deserialize, Serialize};

use crate::entry::{bisect, find_gamma_long, find_gamma_short, raw_payoff, terminal_expectation, ValueTable};
use crate::error::{Error, Result};
use crate::exit::Position;
use crate::kernels::{terminal_levels, KernelSpec};
use crate::model::{
    classify_degenerate, DegeneratePolicy, Interval, MarketSpec, ModelSpec, Outcome, Problem,
    Regime, Thresholds,
};
use crate::volterra::{
    coupled_residual_report, represent_coupled, solve_backward_coupled, Boundary, CoupledEquation,
    SolverConfig, TimeGrid, TimeQuadrature,
};

/// Ordering of the break-even levels around the crossover `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChooserCase {
    /// `γ^{1,L} < m < γ^{2,L}`: a no-trade band separates the two payoffs.
    Separated,
    /// `γ^{2,L} < m < γ^{1,L}`: the payoffs overlap and switch at `m`.
    Overlapping,
    /// Any other ordering (ties, thresholds outside the state space).
    Other,
}

impl ChooserCase {
    pub fn detect(gamma_long: f64, gamma_short: f64, m: f64) -> Self {
        if gamma_long < m && m < gamma_short {
            ChooserCase::Separated
        } else if gamma_short < m && m < gamma_long {
            ChooserCase::Overlapping
        } else {
            ChooserCase::Other
        }
    }
}

fn check_pair(long: &ValueTable, short: &ValueTable) -> Result<()> {
    if long.exit.position() != Position::Long || short.exit.position() != Position::Short {
        return Err(Error::Argument("chooser needs a long and a short exit table, in that order".into()));
    }
    Ok(())
}

/// Crossover `m` with `V^{1,L}(m) + V^{2,L}(m) = 2m`, bracketed by
/// `(b^{2,L}(0), b^{1,L}(0))`.
pub fn find_m(long: &ValueTable, short: &ValueTable) -> Result<f64> {
    check_pair(long, short)?;
    let f = |x: f64| Ok(long.eval(x)? + short.eval(x)? - 2.0 * x);
    bisect(f, short.kink, long.kink, "crossover m")
}

/// Payoff of the chooser written as the three-way maximum.
pub fn chooser_payoff(long: &ValueTable, short: &ValueTable, x: f64) -> Result<f64> {
    Ok(raw_payoff(long, x)?.max(raw_payoff(short, x)?).max(0.0))
}

/// The same payoff from its indicator decomposition
/// `(V^{1,L} − x − c) 1{x < m ∧ γ^{1,L}} + (x − c − V^{2,L}) 1{x > m ∨ γ^{2,L}}`.
pub fn chooser_payoff_split(long: &ValueTable, short: &ValueTable, thresholds: &ChooserThresholds, x: f64) -> Result<f64> {
    let mut g = 0.0;
    if x < thresholds.m.min(thresholds.gamma_long) {
        g += raw_payoff(long, x)?;
    }
    if x > thresholds.m.max(thresholds.gamma_short) {
        g += raw_payoff(short, x)?;
    }
    Ok(g)
}

/// Thresholds shaping the chooser payoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChooserThresholds {
    pub gamma_long: f64,
    pub gamma_short: f64,
    pub m: f64,
}

impl ChooserThresholds {
    pub fn case(&self) -> ChooserCase {
        ChooserCase::detect(self.gamma_long, self.gamma_short, self.m)
    }

    fn as_thresholds(&self) -> Thresholds {
        Thresholds {
            gamma_long: Some(self.gamma_long),
            gamma_short: Some(self.gamma_short),
            m: Some(self.m),
        }
    }
}

/// The coupled pair: `G^{0,E}(b) = e^{−r(T−t)} E[G^{0,E}(X_T)] + ∫ K^{0,E} du`
/// evaluated at `b = b^{0,E}(t)` and `b = b̃^{0,E}(t)`.
#[derive(Debug, Clone)]
pub struct ChooserEquation {
    pub long: ValueTable,
    pub short: ValueTable,
    pub thresholds: ChooserThresholds,
    pub model: ModelSpec,
    pub market: MarketSpec,
    pub kernel: KernelSpec,
    pub terminal: (f64, f64),
}

impl ChooserEquation {
    pub fn payoff(&self, x: f64) -> Result<f64> {
        chooser_payoff(&self.long, &self.short, x)
    }

    fn kinks(&self) -> [f64; 5] {
        let th = &self.thresholds;
        [th.gamma_long, th.gamma_short, th.m, self.long.kink, self.short.kink]
    }
}

impl CoupledEquation for ChooserEquation {
    fn lhs_lower(&self, _t: f64, y: f64) -> Result<f64> {
        raw_payoff(&self.long, y)
    }

    fn lhs_upper(&self, _t: f64, y: f64) -> Result<f64> {
        raw_payoff(&self.short, y)
    }

    fn terminal_term(&self, t: f64, y: f64) -> Result<f64> {
        let g = |x: f64| self.payoff(x);
        terminal_expectation(&g, &self.model, self.market.r, t, y, self.market.deadline, &self.kinks())
    }

    fn kernel(&self, t: f64, u: f64, x: f64, z: f64, z2: f64) -> Result<f64> {
        self.kernel.eval(&self.model, t, u, x, z, Some(z2))
    }

    fn terminal_values(&self) -> (f64, f64) {
        self.terminal
    }

    fn state_space(&self) -> Interval {
        self.model.state_space
    }

    fn scale(&self) -> f64 {
        self.model.scale()
    }
}

/// A solved chooser.
#[derive(Debug, Clone)]
pub struct ChooserSolution {
    pub equation: ChooserEquation,
    /// `b^{0,E}`, increasing.
    pub lower: Boundary,
    /// `b̃^{0,E}`, decreasing.
    pub upper: Boundary,
}

impl ChooserSolution {
    pub fn thresholds(&self) -> ChooserThresholds {
        self.equation.thresholds
    }

    pub fn case(&self) -> ChooserCase {
        self.equation.thresholds.case()
    }

    /// The side entered at `(t, x)`, if any.
    pub fn entry_side(&self, t: f64, x: f64) -> Option<Position> {
        if t >= self.equation.market.deadline {
            let th = &self.equation.thresholds;
            return if x < th.m.min(th.gamma_long) {
                Some(Position::Long)
            } else if x > th.m.max(th.gamma_short) {
                Some(Position::Short)
            } else {
                None
            };
        }
        if x <= self.lower.at(t) {
            Some(Position::Long)
        } else if x >= self.upper.at(t) {
            Some(Position::Short)
        } else {
            None
        }
    }

    /// `V^{0,E}(t, x)`.
    pub fn value(&self, t: f64, x: f64) -> Result<f64> {
        self.equation.model.check_state(x)?;
        let payoff = self.equation.payoff(x)?;
        if t >= self.equation.market.deadline || self.entry_side(t, x).is_some() {
            return Ok(payoff);
        }
        Ok(represent_coupled(&self.equation, &self.lower, &self.upper, t.max(0.0), x)?.max(payoff))
    }

    pub fn residuals(&self, rule: TimeQuadrature) -> Result<Vec<(usize, f64, f64)>> {
        coupled_residual_report(&self.equation, &self.lower, &self.upper, rule)
    }
}

/// Solve the chooser from the tabulated long and short exit values.
pub fn solve_chooser(long: &ValueTable, short: &ValueTable, grid: &TimeGrid, cfg: &SolverConfig) -> Result<Outcome<ChooserSolution>> {
    check_pair(long, short)?;
    let model = *long.exit.model();
    let market = *long.exit.market();
    if short.exit.model() != &model || short.exit.market() != &market {
        return Err(Error::Argument("long and short exits were solved under different specs".into()));
    }
    let gamma_long = find_gamma_long(long)?.level(Position::Long);
    let gamma_short = find_gamma_short(short)?.level(Position::Short);
    let m = find_m(long, short)?;
    let thresholds = ChooserThresholds { gamma_long, gamma_short, m };
    let plain = thresholds.as_thresholds();
    let regime = classify_degenerate(Problem::Chooser, &model, &market, &plain)?;
    if regime != Regime::NonDegenerate {
        return Ok(Outcome::Degenerate(DegeneratePolicy {
            problem: Problem::Chooser,
            regime,
        }));
    }
    if (grid.horizon - market.deadline).abs() > 1e-12 * market.deadline.max(1.0) {
        return Err(Error::Argument(format!(
            "chooser grid horizon {} differs from the deadline {}",
            grid.horizon, market.deadline
        )));
    }
    let (lo_t, hi_t) = terminal_levels(Problem::Chooser, &model, &market, &plain)?;
    let equation = ChooserEquation {
        long: long.clone(),
        short: short.clone(),
        thresholds,
        model,
        market,
        kernel: KernelSpec::for_problem(Problem::Chooser, &model, &market, &plain)?,
        terminal: (lo_t, hi_t.expect("chooser has two terminal levels")),
    };
    let (lower, upper) = solve_backward_coupled(&equation, grid, cfg)?;
    Ok(Outcome::Solved(ChooserSolution { equation, lower, upper }))
}
