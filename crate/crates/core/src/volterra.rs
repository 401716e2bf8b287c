//! Backward-in-time solver for free boundaries defined by nonlinear Volterra
//! integral equations of the form
//!
//! ```text
//! lhs(t, b(t)) = J(t, b(t)) + ∫_t^H K(t, u, b(t), b(u)) du,   b(H) = b_H,
//! ```
//!
//! where `J` is a terminal-expectation term and `K` a kernel from
//! [`crate::kernels`]. Each node is a scalar root-finding problem in `b(t_i)`
//! once the tail `b(t_{i+1}), …, b(t_N)` is known.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Interval;
use crate::quadrature::{try_integrate, QuadConfig};

/// Uniform grid `t_i = i·H/N`, `i = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::Argument(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        if n_steps < 2 {
            return Err(Error::Argument(format!("time grid needs at least 2 steps, got {n_steps}")));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.t(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

/// A free boundary sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub monotonicity: Monotonicity,
    pub terminal_value: f64,
}

impl Boundary {
    /// Validates length, terminal value and monotonicity (up to `tol`).
    pub fn new(grid: TimeGrid, values: Vec<f64>, monotonicity: Monotonicity, tol: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Argument(format!(
                "boundary has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let b = Self {
            grid,
            terminal_value: values[grid.n_steps],
            values,
            monotonicity,
        };
        b.check_monotone(tol)?;
        Ok(b)
    }

    /// Constant boundary, e.g. for a vanishing horizon.
    pub fn constant(grid: TimeGrid, value: f64, monotonicity: Monotonicity) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
            monotonicity,
            terminal_value: value,
        }
    }

    /// Linear interpolation in time; queries outside `[0, H]` clamp to the end values.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.grid.n_steps;
        if !(t > 0.0) || self.grid.horizon == 0.0 {
            return self.values[0];
        }
        if t >= self.grid.horizon {
            return self.values[n];
        }
        let pos = t / self.grid.dt();
        let j = (pos.floor() as usize).min(n - 1);
        let w = pos - j as f64;
        self.values[j] * (1.0 - w) + self.values[j + 1] * w
    }

    /// The same boundary moved by `delta` in space (unchecked).
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v + delta).collect(),
            monotonicity: self.monotonicity,
            terminal_value: self.terminal_value + delta,
        }
    }

    /// Largest change between adjacent nodes.
    pub fn max_jump(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }

    pub fn check_monotone(&self, tol: f64) -> Result<()> {
        for (i, w) in self.values.windows(2).enumerate() {
            let bad = match self.monotonicity {
                Monotonicity::Increasing => w[1] < w[0] - tol,
                Monotonicity::Decreasing => w[1] > w[0] + tol,
            };
            if bad {
                return Err(Error::NotMonotone {
                    node: i,
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        Ok(())
    }
}

/// Time quadrature for the Volterra integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeQuadrature {
    Trapezoid,
    RightEndpoint,
    /// Trapezoid, except the panel touching the diagonal takes the diagonal
    /// value over its full width. Damps the alternating mode the plain
    /// trapezoid excites when the payoff slope at the boundary is below one.
    LeftPanel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// `None` uses the equation's own preference.
    pub quadrature: Option<TimeQuadrature>,
    /// Required `|lhs − rhs|` at every node.
    pub fixed_point_tol: f64,
    pub max_iters: usize,
    /// Relaxation of the coupled alternating iteration; halved on oscillation.
    pub damping: f64,
    /// Initial half-width of the bisection bracket; `None` uses 0.2 × the model's scale.
    pub bracket_width: Option<f64>,
    pub bracket_doublings: usize,
    /// Admissible violation of the boundary's monotonicity.
    pub monotone_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            quadrature: None,
            fixed_point_tol: 1e-9,
            max_iters: 200,
            damping: 1.0,
            bracket_width: None,
            bracket_doublings: 8,
            monotone_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_point_tol > 0.0) {
            return Err(Error::InvalidParameter("fixed_point_tol must be > 0".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter("damping must lie in (0, 1]".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if let Some(w) = self.bracket_width {
            if !(w > 0.0) {
                return Err(Error::InvalidParameter("bracket_width must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// A boundary equation with a single unknown curve.
pub trait BoundaryEquation {
    /// Payoff side of the equation, e.g. `y − c` for the long exit.
    fn lhs(&self, t: f64, y: f64) -> Result<f64>;
    /// Discounted terminal expectation `J(t, y)`.
    fn terminal_term(&self, t: f64, y: f64) -> Result<f64>;
    /// `K(t, u, x, z)`.
    fn kernel(&self, t: f64, u: f64, x: f64, z: f64) -> Result<f64>;
    fn terminal_value(&self) -> f64;
    fn monotonicity(&self) -> Monotonicity;
    fn state_space(&self) -> Interval;
    /// Spatial scale used to size brackets.
    fn scale(&self) -> f64;
    /// Time rule used when the solver config leaves it open.
    fn preferred_quadrature(&self) -> TimeQuadrature {
        TimeQuadrature::Trapezoid
    }
}

/// Two boundaries `lower < upper` coupled through a shared kernel
/// `K(t, u, x, z, z̃)` and a shared terminal term.
pub trait CoupledEquation {
    fn lhs_lower(&self, t: f64, y: f64) -> Result<f64>;
    fn lhs_upper(&self, t: f64, y: f64) -> Result<f64>;
    fn terminal_term(&self, t: f64, y: f64) -> Result<f64>;
    fn kernel(&self, t: f64, u: f64, x: f64, z: f64, z2: f64) -> Result<f64>;
    /// `(lower, upper)` at the horizon.
    fn terminal_values(&self) -> (f64, f64);
    fn state_space(&self) -> Interval;
    fn scale(&self) -> f64;
    fn preferred_quadrature(&self) -> TimeQuadrature {
        TimeQuadrature::LeftPanel
    }
}

/// `∫_{t_i}^{H} f du` by the configured rule.
fn time_integral(grid: &TimeGrid, rule: TimeQuadrature, i: usize, mut f: impl FnMut(f64, usize) -> Result<f64>) -> Result<f64> {
    let n = grid.n_steps;
    let dt = grid.dt();
    let mut acc = 0.0;
    match rule {
        TimeQuadrature::Trapezoid => {
            for j in i..=n {
                let w = if j == i || j == n { 0.5 * dt } else { dt };
                acc += w * f(grid.t(j), j)?;
            }
        }
        TimeQuadrature::RightEndpoint => {
            for j in i + 1..=n {
                acc += dt * f(grid.t(j), j)?;
            }
        }
        TimeQuadrature::LeftPanel => {
            acc += dt * f(grid.t(i), i)?;
            if i + 1 < n {
                for j in i + 1..=n {
                    let w = if j == i + 1 || j == n { 0.5 * dt } else { dt };
                    acc += w * f(grid.t(j), j)?;
                }
            }
        }
    }
    Ok(acc)
}

/// `lhs − rhs` at node `i` for candidate `y`, with `tail[j]` used for `j > i`.
fn node_residual<E: BoundaryEquation + ?Sized>(eq: &E, grid: &TimeGrid, rule: TimeQuadrature, i: usize, y: f64, tail: &[f64]) -> Result<f64> {
    let t = grid.t(i);
    let integral = time_integral(grid, rule, i, |u, j| eq.kernel(t, u, y, if j == i { y } else { tail[j] }))?;
    Ok(eq.lhs(t, y)? - eq.terminal_term(t, y)? - integral)
}

/// Right-hand side at node `i` for state `x`, with `pair` the candidate boundaries at node `i`.
#[allow(clippy::too_many_arguments)]
fn coupled_residuals<E: CoupledEquation + ?Sized>(
    eq: &E,
    grid: &TimeGrid,
    rule: TimeQuadrature,
    i: usize,
    x: f64,
    pair: (f64, f64),
    lower: &[f64],
    upper: &[f64],
) -> Result<f64> {
    let t = grid.t(i);
    let integral = time_integral(grid, rule, i, |u, j| {
        let (z, z2) = if j == i { pair } else { (lower[j], upper[j]) };
        eq.kernel(t, u, x, z, z2)
    })?;
    Ok(eq.terminal_term(t, x)? + integral)
}

/// Steps of the outward root scan on each side of the starting point.
const SCAN_STEPS: usize = 16;

/// Root of `f` nearest to `center`, bisected to `cfg.fixed_point_tol`.
///
/// Node residuals can have several roots a few `dt`-scales apart, so the
/// bracket is found by scanning outward from `center` in steps of
/// `half_width / 8`, checking the side the boundary's monotonicity allows
/// first. Beyond the scan the bracket doubles symmetrically.
#[allow(clippy::too_many_arguments)]
fn solve_scalar(
    f: &dyn Fn(f64) -> Result<f64>,
    center: f64,
    half_width: f64,
    space: Interval,
    mono: Monotonicity,
    cfg: &SolverConfig,
    node: usize,
    t: f64,
) -> Result<f64> {
    let clamp = |v: f64| v.clamp(space.lower, space.upper);
    let f_c = f(center)?;
    if f_c == 0.0 {
        return Ok(center);
    }
    // backward in time an increasing boundary can only move down
    let dirs: [f64; 2] = match mono {
        Monotonicity::Increasing => [-1.0, 1.0],
        Monotonicity::Decreasing => [1.0, -1.0],
    };
    let h = half_width / 8.0;
    let mut last = [(center, f_c); 2];
    let mut open = [true; 2];
    let mut bracket = None;
    'scan: for k in 1..=SCAN_STEPS {
        for (side, &d) in dirs.iter().enumerate() {
            if !open[side] {
                continue;
            }
            let y = clamp(center + d * k as f64 * h);
            if y == last[side].0 {
                open[side] = false;
                continue;
            }
            let fy = f(y)?;
            if fy == 0.0 {
                return Ok(y);
            }
            let (yp, fp) = last[side];
            if (fy < 0.0) != (fp < 0.0) {
                bracket = Some(if yp < y { (yp, y, fp, fy) } else { (y, yp, fy, fp) });
                break 'scan;
            }
            last[side] = (y, fy);
        }
    }
    let mut w = 2.0 * half_width;
    let (mut lo, mut hi, mut f_lo, mut f_hi) = (center, center, f_c, f_c);
    if let Some(b) = bracket {
        (lo, hi, f_lo, f_hi) = b;
    } else {
        for _ in 0..=cfg.bracket_doublings {
            lo = clamp(center - w);
            hi = clamp(center + w);
            f_lo = f(lo)?;
            f_hi = f(hi)?;
            if f_lo == 0.0 {
                return Ok(lo);
            }
            if f_hi == 0.0 {
                return Ok(hi);
            }
            if (f_lo < 0.0) != (f_hi < 0.0) {
                bracket = Some((lo, hi, f_lo, f_hi));
                break;
            }
            w *= 2.0;
        }
    }
    if bracket.is_none() {
        return Err(Error::Bracket {
            node,
            t,
            lo,
            hi,
            f_lo,
            f_hi,
        });
    }
    let mut best = (lo, f_lo.abs());
    if f_hi.abs() < best.1 {
        best = (hi, f_hi.abs());
    }
    for _ in 0..cfg.max_iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm.abs() < best.1 {
            best = (mid, fm.abs());
        }
        if fm == 0.0 {
            break;
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) && best.1 <= cfg.fixed_point_tol {
            break;
        }
    }
    if best.1 > cfg.fixed_point_tol {
        return Err(Error::Convergence {
            node,
            t,
            iters: cfg.max_iters,
            residual: best.1,
        });
    }
    Ok(best.0)
}

fn check_step(mono: Monotonicity, node: usize, here: f64, next: f64, tol: f64) -> Result<()> {
    let bad = match mono {
        Monotonicity::Increasing => here > next + tol,
        Monotonicity::Decreasing => here < next - tol,
    };
    if bad {
        Err(Error::NotMonotone {
            node,
            prev: here,
            next,
        })
    } else {
        Ok(())
    }
}

/// Solve a single boundary backward from its terminal value.
pub fn solve_backward<E: BoundaryEquation + ?Sized>(eq: &E, grid: &TimeGrid, cfg: &SolverConfig) -> Result<Boundary> {
    cfg.validate()?;
    let space = eq.state_space();
    let terminal = eq.terminal_value();
    if !space.contains_closed(terminal) {
        return Err(Error::Domain {
            value: terminal,
            lower: space.lower,
            upper: space.upper,
        });
    }
    if grid.horizon == 0.0 {
        return Ok(Boundary::constant(*grid, terminal, eq.monotonicity()));
    }
    let n = grid.n_steps;
    let width = cfg.bracket_width.unwrap_or(0.2 * eq.scale());
    let rule = cfg.quadrature.unwrap_or_else(|| eq.preferred_quadrature());
    let mut values = vec![terminal; n + 1];
    for i in (0..n).rev() {
        let t = grid.t(i);
        let f = |y: f64| node_residual(eq, grid, rule, i, y, &values);
        let y = solve_scalar(&f, values[i + 1], width, space, eq.monotonicity(), cfg, i, t)?;
        check_step(eq.monotonicity(), i, y, values[i + 1], cfg.monotone_tol)?;
        values[i] = y;
    }
    Boundary::new(*grid, values, eq.monotonicity(), cfg.monotone_tol)
}

/// Solve a lower/upper pair backward, alternating the two scalar node
/// equations until both stop moving.
pub fn solve_backward_coupled<E: CoupledEquation + ?Sized>(eq: &E, grid: &TimeGrid, cfg: &SolverConfig) -> Result<(Boundary, Boundary)> {
    cfg.validate()?;
    let space = eq.state_space();
    let (lo_t, hi_t) = eq.terminal_values();
    for v in [lo_t, hi_t] {
        if !space.contains_closed(v) {
            return Err(Error::Domain {
                value: v,
                lower: space.lower,
                upper: space.upper,
            });
        }
    }
    if lo_t > hi_t {
        return Err(Error::Crossing {
            node: grid.n_steps,
            lower: lo_t,
            upper: hi_t,
        });
    }
    if grid.horizon == 0.0 {
        return Ok((
            Boundary::constant(*grid, lo_t, Monotonicity::Increasing),
            Boundary::constant(*grid, hi_t, Monotonicity::Decreasing),
        ));
    }
    let n = grid.n_steps;
    let width = cfg.bracket_width.unwrap_or(0.2 * eq.scale());
    let rule = cfg.quadrature.unwrap_or_else(|| eq.preferred_quadrature());
    let mut lower = vec![lo_t; n + 1];
    let mut upper = vec![hi_t; n + 1];
    for i in (0..n).rev() {
        let t = grid.t(i);
        let (mut y_lo, mut y_hi) = (lower[i + 1], upper[i + 1]);
        let mut damping = cfg.damping;
        let mut prev_step: Option<(f64, f64)> = None;
        let mut converged = false;
        for _ in 0..cfg.max_iters {
            let f_lo = |y: f64| -> Result<f64> {
                let rhs = coupled_residuals(eq, grid, rule, i, y, (y, y_hi.max(y)), &lower, &upper)?;
                Ok(eq.lhs_lower(t, y)? - rhs)
            };
            let new_lo = solve_scalar(&f_lo, y_lo, width, space, Monotonicity::Increasing, cfg, i, t)?;
            let f_hi = |y: f64| -> Result<f64> {
                let rhs = coupled_residuals(eq, grid, rule, i, y, (new_lo.min(y), y), &lower, &upper)?;
                Ok(eq.lhs_upper(t, y)? - rhs)
            };
            let new_hi = solve_scalar(&f_hi, y_hi, width, space, Monotonicity::Decreasing, cfg, i, t)?;
            let step = (new_lo - y_lo, new_hi - y_hi);
            if let Some(p) = prev_step {
                // sign-alternating updates: relax harder
                if p.0 * step.0 < 0.0 || p.1 * step.1 < 0.0 {
                    damping *= 0.5;
                }
            }
            y_lo += damping * step.0;
            y_hi += damping * step.1;
            prev_step = Some(step);
            if step.0.abs().max(step.1.abs()) <= 1e-13 * (1.0 + y_lo.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                node: i,
                t,
                iters: cfg.max_iters,
                residual: f64::NAN,
            });
        }
        if y_lo >= y_hi {
            return Err(Error::Crossing {
                node: i,
                lower: y_lo,
                upper: y_hi,
            });
        }
        check_step(Monotonicity::Increasing, i, y_lo, lower[i + 1], cfg.monotone_tol)?;
        check_step(Monotonicity::Decreasing, i, y_hi, upper[i + 1], cfg.monotone_tol)?;
        lower[i] = y_lo;
        upper[i] = y_hi;
    }
    Ok((
        Boundary::new(*grid, lower, Monotonicity::Increasing, cfg.monotone_tol)?,
        Boundary::new(*grid, upper, Monotonicity::Decreasing, cfg.monotone_tol)?,
    ))
}

/// `lhs − rhs` at node `i` of a boundary when its value there is replaced by `y`.
pub fn residual_at<E: BoundaryEquation + ?Sized>(eq: &E, boundary: &Boundary, rule: TimeQuadrature, i: usize, y: f64) -> Result<f64> {
    let grid = &boundary.grid;
    if i >= grid.n_steps {
        let t = grid.horizon;
        return Ok(eq.lhs(t, y)? - eq.terminal_term(t, y)?);
    }
    node_residual(eq, grid, rule, i, y, &boundary.values)
}

/// `lhs − rhs` of the discretised equation at every node of a boundary.
pub fn residual_report<E: BoundaryEquation + ?Sized>(eq: &E, boundary: &Boundary, rule: TimeQuadrature) -> Result<Vec<(usize, f64)>> {
    let grid = &boundary.grid;
    (0..grid.len())
        .map(|i| {
            let r = if i == grid.n_steps {
                let t = grid.horizon;
                let y = boundary.values[i];
                eq.lhs(t, y)? - eq.terminal_term(t, y)?
            } else {
                node_residual(eq, grid, rule, i, boundary.values[i], &boundary.values)?
            };
            Ok((i, r))
        })
        .collect()
}

/// Residuals of both equations of a coupled pair.
pub fn coupled_residual_report<E: CoupledEquation + ?Sized>(
    eq: &E,
    lower: &Boundary,
    upper: &Boundary,
    rule: TimeQuadrature,
) -> Result<Vec<(usize, f64, f64)>> {
    let grid = &lower.grid;
    (0..grid.len())
        .map(|i| {
            let t = grid.t(i);
            let (lo, hi) = (lower.values[i], upper.values[i]);
            let (r_lo, r_hi) = if i == grid.n_steps {
                (
                    eq.lhs_lower(t, lo)? - eq.terminal_term(t, lo)?,
                    eq.lhs_upper(t, hi)? - eq.terminal_term(t, hi)?,
                )
            } else {
                let rl = coupled_residuals(eq, grid, rule, i, lo, (lo, hi), &lower.values, &upper.values)?;
                let rh = coupled_residuals(eq, grid, rule, i, hi, (lo, hi), &lower.values, &upper.values)?;
                (eq.lhs_lower(t, lo)? - rl, eq.lhs_upper(t, hi)? - rh)
            };
            Ok((i, r_lo, r_hi))
        })
        .collect()
}

pub(crate) fn value_quad_config() -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-11,
        rel_tol: 1e-10,
        max_intervals: 20_000,
    }
}

/// `J(t, x) + ∫_t^H K(t, u, x, b(u)) du` with adaptive quadrature in `u`,
/// breaking at the boundary's grid nodes.
pub fn represent<E: BoundaryEquation + ?Sized>(eq: &E, boundary: &Boundary, t: f64, x: f64) -> Result<f64> {
    let horizon = boundary.grid.horizon;
    let j = eq.terminal_term(t, x)?;
    if t >= horizon {
        return Ok(j);
    }
    let integral = try_integrate(
        |u| eq.kernel(t, u, x, boundary.at(u)),
        t,
        horizon,
        &boundary.grid.nodes(),
        &value_quad_config(),
    )?;
    Ok(j + integral)
}

/// Coupled analogue of [`represent`].
pub fn represent_coupled<E: CoupledEquation + ?Sized>(eq: &E, lower: &Boundary, upper: &Boundary, t: f64, x: f64) -> Result<f64> {
    let horizon = lower.grid.horizon;
    let j = eq.terminal_term(t, x)?;
    if t >= horizon {
        return Ok(j);
    }
    let integral = try_integrate(
        |u| eq.kernel(t, u, x, lower.at(u), upper.at(u)),
        t,
        horizon,
        &lower.grid.nodes(),
        &value_quad_config(),
    )?;
    Ok(j + integral)
}
