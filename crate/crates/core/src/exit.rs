//! Exit problems: liquidate a long position (sell, maximising
//! `E[e^{−rζ}(X_ζ − c)]`) or close a short position (buy back, minimising
//! `E[e^{−rζ}(X_ζ + c)]`) within a window of length `T′`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{terminal_levels, KernelSpec};
use crate::model::{
    classify_degenerate, mean_m, DegeneratePolicy, Interval, MarketSpec, ModelSpec, Outcome,
    Problem, Regime, Thresholds,
};
use crate::volterra::{
    represent, residual_report, solve_backward, Boundary, BoundaryEquation, Monotonicity,
    SolverConfig, TimeGrid, TimeQuadrature,
};

/// Direction of a position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Long,
    Short,
}

impl Position {
    pub fn exit_problem(&self) -> Problem {
        match self {
            Position::Long => Problem::ExitLong,
            Position::Short => Problem::ExitShort,
        }
    }

    pub fn entry_problem(&self) -> Problem {
        match self {
            Position::Long => Problem::EntryLong,
            Position::Short => Problem::EntryShort,
        }
    }
}

/// The exit boundary equation `y ∓ c = e^{−r(T′−t)}(m(T′−t, y) ∓ c) + ∫ K du`.
#[derive(Debug, Clone)]
pub struct ExitEquation {
    pub position: Position,
    pub model: ModelSpec,
    pub market: MarketSpec,
    pub kernel: KernelSpec,
    pub terminal: f64,
}

impl ExitEquation {
    pub fn new(position: Position, model: &ModelSpec, market: &MarketSpec) -> Result<Self> {
        let problem = position.exit_problem();
        let none = Thresholds::default();
        Ok(Self {
            position,
            model: *model,
            market: *market,
            kernel: KernelSpec::for_problem(problem, model, market, &none)?,
            terminal: terminal_levels(problem, model, market, &none)?.0,
        })
    }

    /// Signed cost: the seller pays `c` (`−c`), the buyer pays `c` (`+c`).
    fn cost(&self) -> f64 {
        match self.position {
            Position::Long => -self.market.c,
            Position::Short => self.market.c,
        }
    }

    /// Immediate-stop payoff `x ∓ c`.
    pub fn payoff(&self, x: f64) -> f64 {
        x + self.cost()
    }
}

impl BoundaryEquation for ExitEquation {
    fn lhs(&self, _t: f64, y: f64) -> Result<f64> {
        Ok(self.payoff(y))
    }

    fn terminal_term(&self, t: f64, y: f64) -> Result<f64> {
        let s = (self.market.window - t).max(0.0);
        Ok((-self.market.r * s).exp() * (mean_m(&self.model, s, y)? + self.cost()))
    }

    fn kernel(&self, t: f64, u: f64, x: f64, z: f64) -> Result<f64> {
        self.kernel.eval(&self.model, t, u, x, z, None)
    }

    fn terminal_value(&self) -> f64 {
        self.terminal
    }

    fn monotonicity(&self) -> Monotonicity {
        match self.position {
            Position::Long => Monotonicity::Decreasing,
            Position::Short => Monotonicity::Increasing,
        }
    }

    fn state_space(&self) -> Interval {
        self.model.state_space
    }

    fn scale(&self) -> f64 {
        self.model.scale()
    }
}

/// A solved exit problem.
#[derive(Debug, Clone)]
pub struct ExitSolution {
    pub equation: ExitEquation,
    /// `b^{1,L}` (long) or `b^{2,L}` (short) over `[0, T′]`.
    pub boundary: Boundary,
}

impl ExitSolution {
    pub fn position(&self) -> Position {
        self.equation.position
    }

    pub fn model(&self) -> &ModelSpec {
        &self.equation.model
    }

    pub fn market(&self) -> &MarketSpec {
        &self.equation.market
    }

    /// Whether stopping at `(t, x)` is optimal.
    pub fn in_stopping_region(&self, t: f64, x: f64) -> bool {
        let b = self.boundary.at(t);
        match self.position() {
            Position::Long => x >= b,
            Position::Short => x <= b,
        }
    }

    /// `V(t, x)`: the payoff on the stopping region, otherwise the integral
    /// representation projected onto the right side of the payoff.
    pub fn value(&self, t: f64, x: f64) -> Result<f64> {
        self.equation.model.check_state(x)?;
        let payoff = self.equation.payoff(x);
        if t >= self.market().window || self.in_stopping_region(t, x) {
            return Ok(payoff);
        }
        let v = represent(&self.equation, &self.boundary, t.max(0.0), x)?;
        Ok(match self.position() {
            Position::Long => v.max(payoff),
            Position::Short => v.min(payoff),
        })
    }

    /// Residual of the discretised boundary equation at each node.
    pub fn residuals(&self, rule: TimeQuadrature) -> Result<Vec<(usize, f64)>> {
        residual_report(&self.equation, &self.boundary, rule)
    }
}

fn solve_exit(position: Position, model: &ModelSpec, market: &MarketSpec, grid: &TimeGrid, cfg: &SolverConfig) -> Result<Outcome<ExitSolution>> {
    let problem = position.exit_problem();
    let regime = classify_degenerate(problem, model, market, &Thresholds::default())?;
    if regime != Regime::NonDegenerate {
        return Ok(Outcome::Degenerate(DegeneratePolicy { problem, regime }));
    }
    if (grid.horizon - market.window).abs() > 1e-12 * market.window.max(1.0) {
        return Err(Error::Argument(format!(
            "exit grid horizon {} differs from the exit window {}",
            grid.horizon, market.window
        )));
    }
    let equation = ExitEquation::new(position, model, market)?;
    let boundary = solve_backward(&equation, grid, cfg)?;
    Ok(Outcome::Solved(ExitSolution { equation, boundary }))
}

/// Optimal liquidation boundary `b^{1,L}` of a long position; decreasing with
/// `b^{1,L}(T′) = x*`.
pub fn solve_exit_long(model: &ModelSpec, market: &MarketSpec, grid: &TimeGrid, cfg: &SolverConfig) -> Result<Outcome<ExitSolution>> {
    solve_exit(Position::Long, model, market, grid, cfg)
}

/// Optimal buy-back boundary `b^{2,L}` of a short position; increasing with
/// `b^{2,L}(T′) = x_*`.
pub fn solve_exit_short(model: &ModelSpec, market: &MarketSpec, grid: &TimeGrid, cfg: &SolverConfig) -> Result<Outcome<ExitSolution>> {
    solve_exit(Position::Short, model, market, grid, cfg)
}
