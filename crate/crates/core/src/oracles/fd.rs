//! Finite differences for the obstacle problems `max(V_t + 𝓛V − rV, g − V) = 0`
//! on a truncated interval, with Crank–Nicolson (Rannacher start) or fully
//! implicit time stepping and projected SOR at each step.
//!
//! Every problem is posed as a maximisation; the short exit (a minimisation
//! of the buy-back cost) is solved for `−V` against the obstacle `−(x + c)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exit::Position;
use crate::model::{MarketSpec, ModelSpec, Problem};

/// Smallest node count accepted in either direction.
pub const MIN_NODES: usize = 100;
/// Default half-width of the spatial domain in stationary deviations.
pub const DEFAULT_WIDTH_SD: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdScheme {
    Implicit,
    CrankNicolson,
}

/// Spatial interval, resolution and time stepping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdGrid {
    pub x_min: f64,
    pub x_max: f64,
    /// Number of spatial intervals (`n_x + 1` nodes).
    pub n_x: usize,
    /// Number of time steps over the problem horizon.
    pub n_t: usize,
    pub scheme: FdScheme,
}

impl FdGrid {
    pub fn new(x_min: f64, x_max: f64, n_x: usize, n_t: usize, scheme: FdScheme) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::Argument(format!("bad FD interval [{x_min}, {x_max}]")));
        }
        if n_x < MIN_NODES || n_t < MIN_NODES {
            return Err(Error::Argument(format!(
                "FD grid needs at least {MIN_NODES} steps in x and t, got n_x = {n_x}, n_t = {n_t}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_x,
            n_t,
            scheme,
        })
    }

    /// `θ ± width_sd` stationary deviations, clipped to the state space.
    pub fn around_mean(model: &ModelSpec, width_sd: f64, n_x: usize, n_t: usize, scheme: FdScheme) -> Result<Self> {
        if !(width_sd > 0.0) {
            return Err(Error::Argument(format!("FD width must be positive, got {width_sd}")));
        }
        let reach = width_sd * model.scale();
        let space = model.state_space;
        Self::new(
            (model.theta - reach).max(space.lower),
            (model.theta + reach).min(space.upper),
            n_x,
            n_t,
            scheme,
        )
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_x as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..=self.n_x)
            .map(|j| if j == self.n_x { self.x_max } else { self.x_min + j as f64 * dx })
            .collect()
    }
}

/// PSOR controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    /// Stop when no node moves by more than `tol·(1 + |v|)` in a sweep.
    pub psor_tol: f64,
    pub max_sweeps: usize,
    /// Over-relaxation factor; estimated from the Jacobi spectral radius when absent.
    pub omega: Option<f64>,
    /// A node is in contact when `v − g ≤ contact_tol`.
    pub contact_tol: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            psor_tol: 1e-11,
            max_sweeps: 50_000,
            omega: None,
            contact_tol: 1e-12,
        }
    }
}

/// A maximisation obstacle problem on the nodes of an [`FdGrid`].
#[derive(Debug, Clone)]
pub struct ObstacleProblem {
    pub horizon: f64,
    pub r: f64,
    /// Time-independent obstacle `g`.
    pub obstacle: Vec<f64>,
    /// `V(horizon, ·)`.
    pub terminal: Vec<f64>,
    /// `false` drops the constraint `V ≥ g` (a European problem).
    pub constrained: bool,
}

/// The discrete generator `𝓛 − r`: `lo·v_{j−1} + diag·v_j + up·v_{j+1}`.
#[derive(Debug, Clone)]
struct Operator {
    lo: Vec<f64>,
    diag: Vec<f64>,
    up: Vec<f64>,
}

impl Operator {
    /// Central differences, switching the drift to one-sided differences
    /// wherever a central off-diagonal would turn negative.
    fn new(model: &ModelSpec, r: f64, xs: &[f64]) -> Self {
        let n = xs.len();
        let dx = xs[1] - xs[0];
        let (mut lo, mut diag, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for j in 1..n - 1 {
            let a = 0.5 * model.diffusion(xs[j]).powi(2) / (dx * dx);
            let b = model.drift(xs[j]);
            let (l, u) = (a - 0.5 * b / dx, a + 0.5 * b / dx);
            if l >= 0.0 && u >= 0.0 {
                lo[j] = l;
                up[j] = u;
                diag[j] = -2.0 * a - r;
            } else if b > 0.0 {
                lo[j] = a;
                up[j] = a + b / dx;
                diag[j] = -2.0 * a - b / dx - r;
            } else {
                lo[j] = a - b / dx;
                up[j] = a;
                diag[j] = -2.0 * a + b / dx - r;
            }
        }
        Self { lo, diag, up }
    }

    fn apply(&self, v: &[f64], j: usize) -> f64 {
        self.lo[j] * v[j - 1] + self.diag[j] * v[j] + self.up[j] * v[j + 1]
    }
}

/// One θ-scheme step `(I − α dt L) v = (I + (1 − α) dt L) prev`, `v ≥ g` when constrained.
struct Stepper<'a> {
    op: &'a Operator,
    cfg: &'a FdConfig,
}

impl Stepper<'_> {
    #[allow(clippy::too_many_arguments)]
    fn step(&self, prev: &[f64], dt: f64, alpha: f64, edges: (f64, f64), obstacle: Option<&[f64]>, index: usize, out: &mut [f64]) -> Result<()> {
        let n = prev.len() - 1;
        let op = self.op;
        let mut rhs = vec![0.0; n + 1];
        for j in 1..n {
            rhs[j] = prev[j] + (1.0 - alpha) * dt * op.apply(prev, j);
        }
        let al: Vec<f64> = op.lo.iter().map(|l| -alpha * dt * l).collect();
        let au: Vec<f64> = op.up.iter().map(|u| -alpha * dt * u).collect();
        let ad: Vec<f64> = op.diag.iter().map(|d| 1.0 - alpha * dt * d).collect();
        out[0] = edges.0;
        out[n] = edges.1;
        match obstacle {
            None => {
                rhs[1] -= al[1] * out[0];
                rhs[n - 1] -= au[n - 1] * out[n];
                thomas(&al[1..n], &ad[1..n], &au[1..n], &rhs[1..n], &mut out[1..n]);
                Ok(())
            }
            Some(g) => {
                let omega = self.cfg.omega.unwrap_or_else(|| sor_factor(&al, &ad, &au));
                for j in 1..n {
                    out[j] = prev[j].max(g[j]);
                }
                for sweep in 1..=self.cfg.max_sweeps {
                    let mut moved = false;
                    for j in 1..n {
                        let gs = (rhs[j] - al[j] * out[j - 1] - au[j] * out[j + 1]) / ad[j];
                        let v = (out[j] + omega * (gs - out[j])).max(g[j]);
                        if (v - out[j]).abs() > self.cfg.psor_tol * (1.0 + v.abs()) {
                            moved = true;
                        }
                        out[j] = v;
                    }
                    if !moved {
                        return Ok(());
                    }
                    if sweep == self.cfg.max_sweeps {
                        break;
                    }
                }
                Err(Error::Psor {
                    step: index,
                    iters: self.cfg.max_sweeps,
                })
            }
        }
    }
}

/// Optimal SOR factor for the unconstrained system, from `ρ_J ≈ max 2√(a_l a_u)/a_d · cos(π/n)`.
fn sor_factor(al: &[f64], ad: &[f64], au: &[f64]) -> f64 {
    let n = ad.len() - 1;
    let damp = (std::f64::consts::PI / n as f64).cos();
    let rho = (1..n)
        .map(|j| 2.0 * (al[j] * au[j]).max(0.0).sqrt() / ad[j])
        .fold(0.0, f64::max)
        * damp;
    let rho = rho.min(1.0 - 1e-12);
    (2.0 / (1.0 + (1.0 - rho * rho).sqrt())).clamp(1.0, 1.99)
}

/// Tridiagonal solve; `lo[0]` and `up[last]` are ignored.
fn thomas(lo: &[f64], diag: &[f64], up: &[f64], rhs: &[f64], out: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = up[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lo[i] * c[i - 1];
        c[i] = up[i] / m;
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / m;
    }
    out[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
}

/// Solve an obstacle problem backward from its terminal values.
///
/// Returns one value slice per time node `t_i = i·horizon/n_t`. `edges(t)`
/// gives the Dirichlet values at `x_min` and `x_max`.
pub fn solve_obstacle(
    model: &ModelSpec,
    grid: &FdGrid,
    problem: &ObstacleProblem,
    edges: &dyn Fn(f64) -> (f64, f64),
    cfg: &FdConfig,
) -> Result<Vec<Vec<f64>>> {
    let xs = grid.xs();
    let nodes = xs.len();
    if problem.obstacle.len() != nodes || problem.terminal.len() != nodes {
        return Err(Error::Argument(format!(
            "obstacle/terminal length {}/{} does not match {nodes} grid nodes",
            problem.obstacle.len(),
            problem.terminal.len()
        )));
    }
    if !(problem.horizon > 0.0 && problem.horizon.is_finite()) {
        return Err(Error::Argument(format!("FD horizon must be positive, got {}", problem.horizon)));
    }
    let op = Operator::new(model, problem.r, &xs);
    let stepper = Stepper { op: &op, cfg };
    let obstacle = problem.constrained.then_some(problem.obstacle.as_slice());
    let n_t = grid.n_t;
    let dt = problem.horizon / n_t as f64;
    let mut slices = vec![Vec::new(); n_t + 1];
    slices[n_t] = problem.terminal.clone();
    for i in (0..n_t).rev() {
        let t = i as f64 * dt;
        let mut out = vec![0.0; nodes];
        let first = i + 1 == n_t;
        match grid.scheme {
            FdScheme::CrankNicolson if first => {
                // Rannacher start: two implicit half steps smooth the payoff kink
                let mut half = vec![0.0; nodes];
                stepper.step(&slices[i + 1], 0.5 * dt, 1.0, edges(t + 0.5 * dt), obstacle, i, &mut half)?;
                stepper.step(&half, 0.5 * dt, 1.0, edges(t), obstacle, i, &mut out)?;
            }
            FdScheme::CrankNicolson => stepper.step(&slices[i + 1], dt, 0.5, edges(t), obstacle, i, &mut out)?,
            FdScheme::Implicit => stepper.step(&slices[i + 1], dt, 1.0, edges(t), obstacle, i, &mut out)?,
        }
        slices[i] = out;
    }
    Ok(slices)
}

/// Which side of the frontier the stopping region lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StopSide {
    Below,
    Above,
    Both,
}

fn stop_side(problem: Problem) -> StopSide {
    match problem {
        Problem::ExitLong | Problem::EntryShort => StopSide::Above,
        Problem::ExitShort | Problem::EntryLong => StopSide::Below,
        Problem::Chooser => StopSide::Both,
    }
}

/// A solved FD problem.
#[derive(Debug, Clone)]
pub struct FdSolution {
    pub problem: Problem,
    pub grid: FdGrid,
    pub horizon: f64,
    pub r: f64,
    pub xs: Vec<f64>,
    /// `values[i][j] = V(t_i, x_j)` in the problem's own sign.
    pub values: Vec<Vec<f64>>,
    /// Obstacle in the problem's own sign.
    pub obstacle: Vec<f64>,
    /// Frontier of a stopping region `x ≤ b(t_i)`; `None` where the region
    /// does not reach into the interior.
    pub lower: Option<Vec<Option<f64>>>,
    /// Frontier of a stopping region `x ≥ b(t_i)`.
    pub upper: Option<Vec<Option<f64>>>,
    /// `−1` when the problem was solved in negated form.
    sign: f64,
    op: Operator,
}

impl FdSolution {
    #[allow(clippy::too_many_arguments)]
    fn build(problem: Problem, grid: FdGrid, horizon: f64, r: f64, model: &ModelSpec, internal: Vec<Vec<f64>>, g_internal: Vec<f64>, sign: f64, cfg: &FdConfig) -> Self {
        let xs = grid.xs();
        let op = Operator::new(model, r, &xs);
        let n_t = grid.n_t;
        let side = stop_side(problem);
        let frontier = |from_top: bool| -> Vec<Option<f64>> {
            (0..=n_t)
                .map(|i| {
                    if i == n_t {
                        terminal_frontier(&xs, &g_internal, &op, from_top)
                    } else {
                        contact_frontier(&xs, &internal[i], &g_internal, from_top, cfg.contact_tol)
                    }
                })
                .collect()
        };
        let lower = matches!(side, StopSide::Below | StopSide::Both).then(|| frontier(false));
        let upper = matches!(side, StopSide::Above | StopSide::Both).then(|| frontier(true));
        let values = internal
            .into_iter()
            .map(|s| s.into_iter().map(|v| sign * v).collect())
            .collect();
        Self {
            problem,
            grid,
            horizon,
            r,
            values,
            obstacle: g_internal.iter().map(|g| sign * g).collect(),
            lower,
            upper,
            xs,
            sign,
            op,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.grid.n_t as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.grid.n_t).map(|i| i as f64 * self.dt()).collect()
    }

    /// `V(t, x)` by bilinear interpolation.
    pub fn value_at(&self, t: f64, x: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) || !(self.grid.x_min..=self.grid.x_max).contains(&x) {
            return Err(Error::Argument(format!(
                "({t}, {x}) lies outside the FD domain [0, {}] × [{}, {}]",
                self.horizon, self.grid.x_min, self.grid.x_max
            )));
        }
        let (i, wt) = locate(t / self.dt(), self.grid.n_t);
        let (j, wx) = locate((x - self.grid.x_min) / self.grid.dx(), self.grid.n_x);
        let row = |s: &[f64]| s[j] * (1.0 - wx) + s[j + 1] * wx;
        Ok(row(&self.values[i]) * (1.0 - wt) + row(&self.values[i + 1]) * wt)
    }

    /// `V(0, x)` at the grid nodes.
    pub fn initial_slice(&self) -> &[f64] {
        &self.values[0]
    }

    /// Frontier at time `t` by linear interpolation between time nodes that
    /// both have one.
    pub fn frontier_at(&self, upper: bool, t: f64) -> Option<f64> {
        let f = if upper { self.upper.as_ref()? } else { self.lower.as_ref()? };
        let (i, w) = locate(t / self.dt(), self.grid.n_t);
        Some(f[i]? * (1.0 - w) + f[i + 1]? * w)
    }

    /// Largest `|reference(t, x) − V_fd(t, x)|` over an `n_t × n_x` probe
    /// grid: times `k·H/n_t` for `k < n_t`, prices evenly over
    /// `θ ± width_sd` stationary deviations.
    pub fn probe_difference(
        &self,
        model: &ModelSpec,
        n_t: usize,
        n_x: usize,
        width_sd: f64,
        reference: &dyn Fn(f64, f64) -> Result<f64>,
    ) -> Result<f64> {
        if n_t == 0 || n_x < 2 {
            return Err(Error::Argument(format!("probe grid needs n_t >= 1 and n_x >= 2, got {n_t} x {n_x}")));
        }
        let half = width_sd * model.scale();
        let mut worst: f64 = 0.0;
        for k in 0..n_t {
            let t = k as f64 / n_t as f64 * self.horizon;
            for j in 0..n_x {
                let x = model.theta - half + 2.0 * half * j as f64 / (n_x - 1) as f64;
                worst = worst.max((reference(t, x)? - self.value_at(t, x)?).abs());
            }
        }
        Ok(worst)
    }

    /// `sup |frontier(t) − boundary(t)|` over time nodes with `t ≤ t_max`,
    /// and the number of those nodes without a frontier.
    pub fn frontier_difference(&self, upper: bool, boundary: &dyn Fn(f64) -> f64, t_max: f64) -> (f64, usize) {
        let mut sup: f64 = 0.0;
        let mut missing = 0;
        for k in 0..=self.grid.n_t {
            let t = k as f64 * self.dt();
            if t > t_max * (1.0 + 1e-12) {
                break;
            }
            match self.frontier_at(upper, t) {
                Some(b) => sup = sup.max((b - boundary(t)).abs()),
                None => missing += 1,
            }
        }
        (sup, missing)
    }

    /// Largest residual `|A v − rhs|` of the Crank–Nicolson (or implicit)
    /// linear system over interior nodes off the contact set, skipping the
    /// start-up step.
    pub fn scheme_residual(&self, contact_tol: f64) -> f64 {
        let alpha = match self.grid.scheme {
            FdScheme::Implicit => 1.0,
            FdScheme::CrankNicolson => 0.5,
        };
        let dt = self.dt();
        let n = self.grid.n_x;
        let last = match self.grid.scheme {
            FdScheme::Implicit => self.grid.n_t,
            FdScheme::CrankNicolson => self.grid.n_t - 1,
        };
        let mut worst: f64 = 0.0;
        for i in 0..last {
            let v: Vec<f64> = self.values[i].iter().map(|x| self.sign * x).collect();
            let w: Vec<f64> = self.values[i + 1].iter().map(|x| self.sign * x).collect();
            for j in 1..n {
                let gap = v[j] - self.sign * self.obstacle[j];
                if gap <= contact_tol {
                    continue;
                }
                let res = v[j] - alpha * dt * self.op.apply(&v, j) - w[j] - (1.0 - alpha) * dt * self.op.apply(&w, j);
                worst = worst.max(res.abs());
            }
        }
        worst
    }
}

/// Index and weight of a fractional position clamped to `[0, n]`.
fn locate(pos: f64, n: usize) -> (usize, f64) {
    let pos = pos.clamp(0.0, n as f64);
    let i = (pos.floor() as usize).min(n - 1);
    (i, pos - i as f64)
}

/// Fraction of the interval next to each edge where the Dirichlet layer may
/// keep nodes off the contact set.
const EDGE_LAYER: f64 = 0.125;

/// Interior scan order starting next to one edge.
fn scan(n: usize, from_top: bool) -> Vec<usize> {
    if from_top {
        (1..n).rev().collect()
    } else {
        (1..n).collect()
    }
}

/// Positions in `order` of the stopping block seen from one edge: free nodes
/// inside the edge layer are skipped, then the block runs while `stop` holds.
/// Returns `(first, end)` with `end` the position of the first free node
/// past the block.
fn stop_block(order: &[usize], stop: impl Fn(usize) -> bool) -> Option<(usize, usize)> {
    let layer = (EDGE_LAYER * order.len() as f64).ceil() as usize;
    let first = order.iter().take(layer).position(|&j| stop(j))?;
    let len = order[first..].iter().take_while(|&&j| stop(j)).count();
    Some((first, first + len))
}

/// The far edge of the contact block next to one end of the interval.
///
/// Near a smooth-fit frontier `v − g` grows quadratically, so the frontier is
/// placed where the line through `√(v − g)` at the two nearest free nodes
/// vanishes, kept between the last contact node and the first free one.
fn contact_frontier(xs: &[f64], v: &[f64], g: &[f64], from_top: bool, tol: f64) -> Option<f64> {
    let n = xs.len() - 1;
    let order = scan(n, from_top);
    let (_, k) = stop_block(&order, |j| v[j] - g[j] <= tol)?;
    if k == order.len() {
        return Some(if from_top { xs[0] } else { xs[n] });
    }
    let (jc, j1) = (order[k - 1], order[k]);
    let fallback = 0.5 * (xs[jc] + xs[j1]);
    let Some(&j2) = order.get(k + 1) else {
        return Some(fallback);
    };
    let (s1, s2) = ((v[j1] - g[j1]).max(0.0).sqrt(), (v[j2] - g[j2]).max(0.0).sqrt());
    if !(s2 > s1) {
        return Some(fallback);
    }
    let b = xs[j1] + (xs[j1] - xs[j2]) * s1 / (s2 - s1);
    let (lo, hi) = if xs[jc] < xs[j1] { (xs[jc], xs[j1]) } else { (xs[j1], xs[jc]) };
    Some(b.clamp(lo, hi))
}

/// Limit of the frontier at the horizon: the edge of the block where waiting
/// one more instant does not pay, `(𝓛 − r)g ≤ 0`, located by linear
/// interpolation of the discrete generator.
fn terminal_frontier(xs: &[f64], g: &[f64], op: &Operator, from_top: bool) -> Option<f64> {
    let n = xs.len() - 1;
    let order = scan(n, from_top);
    let h: Vec<f64> = (0..=n).map(|j| if j == 0 || j == n { 0.0 } else { op.apply(g, j) }).collect();
    let (_, k) = stop_block(&order, |j| h[j] <= 0.0)?;
    if k == order.len() {
        return Some(if from_top { xs[0] } else { xs[n] });
    }
    let (jc, j1) = (order[k - 1], order[k]);
    Some(xs[jc] + (xs[j1] - xs[jc]) * (-h[jc]) / (h[j1] - h[jc]))
}

/// FD solution of an exit problem over the window `[0, T′]`.
pub fn fd_exit(position: Position, model: &ModelSpec, market: &MarketSpec, grid: &FdGrid, cfg: &FdConfig) -> Result<FdSolution> {
    let xs = grid.xs();
    let (sign, cost) = match position {
        Position::Long => (1.0, -market.c),
        Position::Short => (-1.0, market.c),
    };
    let g: Vec<f64> = xs.iter().map(|x| sign * (x + cost)).collect();
    let problem = ObstacleProblem {
        horizon: market.window,
        r: market.r,
        obstacle: g.clone(),
        terminal: g.clone(),
        constrained: true,
    };
    let edges = (g[0], g[grid.n_x]);
    let slices = solve_obstacle(model, grid, &problem, &|_| edges, cfg)?;
    Ok(FdSolution::build(position.exit_problem(), *grid, market.window, market.r, model, slices, g, sign, cfg))
}

/// FD solution of an entry problem (`EntryLong`, `EntryShort` or `Chooser`)
/// over `[0, T]`, with the obstacle built from FD exit values at `t = 0` on
/// the same spatial grid.
pub fn fd_entry(
    problem: Problem,
    model: &ModelSpec,
    market: &MarketSpec,
    long_exit: Option<&FdSolution>,
    short_exit: Option<&FdSolution>,
    cfg: &FdConfig,
) -> Result<FdSolution> {
    let need = |s: Option<&FdSolution>, want: Problem| -> Result<FdSolution> {
        let s = s.ok_or_else(|| Error::Argument(format!("{} needs the {} FD solution", problem.name(), want.name())))?;
        if s.problem != want {
            return Err(Error::Argument(format!("expected a {} FD solution, got {}", want.name(), s.problem.name())));
        }
        Ok(s.clone())
    };
    let c = market.c;
    let (grid, g): (FdGrid, Vec<f64>) = match problem {
        Problem::EntryLong => {
            let l = need(long_exit, Problem::ExitLong)?;
            let g = l.xs.iter().zip(l.initial_slice()).map(|(x, v)| (v - x - c).max(0.0)).collect();
            (l.grid, g)
        }
        Problem::EntryShort => {
            let s = need(short_exit, Problem::ExitShort)?;
            let g = s.xs.iter().zip(s.initial_slice()).map(|(x, v)| (x - c - v).max(0.0)).collect();
            (s.grid, g)
        }
        Problem::Chooser => {
            let l = need(long_exit, Problem::ExitLong)?;
            let s = need(short_exit, Problem::ExitShort)?;
            if l.grid != s.grid {
                return Err(Error::Argument("long and short FD exits use different grids".into()));
            }
            let g = l
                .xs
                .iter()
                .zip(l.initial_slice().iter().zip(s.initial_slice()))
                .map(|(x, (vl, vs))| (vl - x - c).max(x - c - vs).max(0.0))
                .collect();
            (l.grid, g)
        }
        other => {
            return Err(Error::Argument(format!("{} is not an entry problem", other.name())));
        }
    };
    let obstacle = ObstacleProblem {
        horizon: market.deadline,
        r: market.r,
        obstacle: g.clone(),
        terminal: g.clone(),
        constrained: true,
    };
    let edges = (g[0], g[grid.n_x]);
    let slices = solve_obstacle(model, &grid, &obstacle, &|_| edges, cfg)?;
    Ok(FdSolution::build(problem, grid, market.deadline, market.r, model, slices, g, 1.0, cfg))
}

/// FD solution of any of the five problems; entry problems solve the exits they need first.
pub fn fd_value(problem: Problem, model: &ModelSpec, market: &MarketSpec, grid: &FdGrid, cfg: &FdConfig) -> Result<FdSolution> {
    match problem {
        Problem::ExitLong => fd_exit(Position::Long, model, market, grid, cfg),
        Problem::ExitShort => fd_exit(Position::Short, model, market, grid, cfg),
        Problem::EntryLong => {
            let l = fd_exit(Position::Long, model, market, grid, cfg)?;
            fd_entry(problem, model, market, Some(&l), None, cfg)
        }
        Problem::EntryShort => {
            let s = fd_exit(Position::Short, model, market, grid, cfg)?;
            fd_entry(problem, model, market, None, Some(&s), cfg)
        }
        Problem::Chooser => {
            let l = fd_exit(Position::Long, model, market, grid, cfg)?;
            let s = fd_exit(Position::Short, model, market, grid, cfg)?;
            fd_entry(problem, model, market, Some(&l), Some(&s), cfg)
        }
    }
}
