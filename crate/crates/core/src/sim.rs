//! Trade lifecycle: simulate a price path, enter by the deadline `T`, then
//! exit within a window of length `T′` that starts at the entry time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chooser::ChooserSolution;
use crate::entry::EntrySolution;
use crate::error::{Error, Result};
use crate::exit::Position;
use crate::model::{sample_transition, transition_law, Family, MarketSpec, ModelSpec};
use crate::volterra::Boundary;

/// Which round trip is traded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Buy first, sell later.
    LongShort,
    /// Sell first, buy back later.
    ShortLong,
    /// Enter on either side, or not at all.
    Chooser,
}

/// How boundary crossings between simulation steps are detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monitoring {
    /// Check the boundary at the simulation steps only.
    Discrete,
    /// Also flag an intermediate crossing with the Brownian-bridge
    /// probability; the trade then happens at the boundary level.
    BrownianBridge,
}

/// Entry and exit rules of a strategy.
///
/// Before the deadline the long side enters when `X ≤ long_entry(t)` and the
/// short side when `X ≥ short_entry(t)`. At the deadline itself the long side
/// enters iff `X_T < long_level` and the short side iff `X_T > short_level`,
/// the levels where the entry payoff turns positive. A missing side never
/// enters.
#[derive(Debug, Clone)]
pub struct TradingRules {
    pub strategy: Strategy,
    pub market: MarketSpec,
    pub long_entry: Option<Boundary>,
    pub short_entry: Option<Boundary>,
    pub long_level: f64,
    pub short_level: f64,
    /// Exit boundaries over `[0, T′]`, required for each side that can enter.
    pub long_exit: Option<Boundary>,
    pub short_exit: Option<Boundary>,
}

impl TradingRules {
    pub fn from_entry(sol: &EntrySolution) -> Self {
        let market = sol.equation.market;
        let exit = Some(sol.exit().boundary.clone());
        let entry = Some(sol.boundary.clone());
        match sol.position() {
            Position::Long => Self {
                strategy: Strategy::LongShort,
                market,
                long_entry: entry,
                short_entry: None,
                long_level: sol.gamma(),
                short_level: f64::INFINITY,
                long_exit: exit,
                short_exit: None,
            },
            Position::Short => Self {
                strategy: Strategy::ShortLong,
                market,
                long_entry: None,
                short_entry: entry,
                long_level: f64::NEG_INFINITY,
                short_level: sol.gamma(),
                long_exit: None,
                short_exit: exit,
            },
        }
    }

    pub fn from_chooser(sol: &ChooserSolution) -> Self {
        let th = sol.thresholds();
        Self {
            strategy: Strategy::Chooser,
            market: sol.equation.market,
            long_entry: Some(sol.lower.clone()),
            short_entry: Some(sol.upper.clone()),
            long_level: th.m.min(th.gamma_long),
            short_level: th.m.max(th.gamma_short),
            long_exit: Some(sol.equation.long.exit.boundary.clone()),
            short_exit: Some(sol.equation.short.exit.boundary.clone()),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.long_entry.is_some() && self.long_exit.is_none() {
            return Err(Error::Argument("a long entry rule needs a long exit boundary".into()));
        }
        if self.short_entry.is_some() && self.short_exit.is_none() {
            return Err(Error::Argument("a short entry rule needs a short exit boundary".into()));
        }
        let horizon_ok = |b: &Option<Boundary>, h: f64| b.as_ref().is_none_or(|b| (b.grid.horizon - h).abs() <= 1e-12 * h.max(1.0));
        if !horizon_ok(&self.long_entry, self.market.deadline) || !horizon_ok(&self.short_entry, self.market.deadline) {
            return Err(Error::Argument("entry boundaries must span [0, T]".into()));
        }
        if !horizon_ok(&self.long_exit, self.market.window) || !horizon_ok(&self.short_exit, self.market.window) {
            return Err(Error::Argument("exit boundaries must span [0, T']".into()));
        }
        Ok(())
    }
}

/// One simulated round trip. Trade fields are `None` when nothing was entered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub entered: bool,
    pub side: Option<Position>,
    /// τ.
    pub entry_time: Option<f64>,
    pub entry_price: Option<f64>,
    /// ζ, on the same clock as τ.
    pub exit_time: Option<f64>,
    pub exit_price: Option<f64>,
    /// Liquidated at `τ + T′` without touching the exit boundary.
    pub forced_exit: bool,
    pub discounted_pnl: f64,
}

impl TradeRecord {
    fn none() -> Self {
        Self {
            entered: false,
            side: None,
            entry_time: None,
            entry_price: None,
            exit_time: None,
            exit_price: None,
            forced_exit: false,
            discounted_pnl: 0.0,
        }
    }

    fn round_trip(side: Position, entry: Fill, exit: Fill, forced: bool, market: &MarketSpec) -> Self {
        let (r, c) = (market.r, market.c);
        let d_in = (-r * entry.time).exp();
        let d_out = (-r * exit.time).exp();
        let pnl = match side {
            Position::Long => d_out * (exit.price - c) - d_in * (entry.price + c),
            Position::Short => d_in * (entry.price - c) - d_out * (exit.price + c),
        };
        Self {
            entered: true,
            side: Some(side),
            entry_time: Some(entry.time),
            entry_price: Some(entry.price),
            exit_time: Some(exit.time),
            exit_price: Some(exit.price),
            forced_exit: forced,
            discounted_pnl: pnl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Fill {
    pub time: f64,
    pub price: f64,
}

/// Exact one-step transitions for OU and CIR, clamped Euler steps otherwise.
#[derive(Debug, Clone)]
pub(crate) struct PathStepper {
    model: ModelSpec,
    dt: f64,
    kind: StepKind,
}

#[derive(Debug, Clone, Copy)]
enum StepKind {
    Ou { decay: f64, sd: f64 },
    Law,
    Euler,
}

impl PathStepper {
    pub fn new(model: &ModelSpec, dt: f64) -> Self {
        let kind = match model.family {
            Family::Ou => {
                let decay = (-model.mu * dt).exp();
                let var = model.sigma * model.sigma * (1.0 - decay * decay) / (2.0 * model.mu);
                StepKind::Ou { decay, sd: var.sqrt() }
            }
            Family::Cir => StepKind::Law,
            Family::Igbm | Family::Jacobi => StepKind::Euler,
        };
        Self { model: *model, dt, kind }
    }

    pub fn step<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let m = &self.model;
        match self.kind {
            StepKind::Ou { decay, sd } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                m.theta + (x - m.theta) * decay + sd * z
            }
            StepKind::Law => {
                let law = transition_law(m, self.dt, x).expect("state kept inside the state space");
                sample_transition(&law, rng).max(0.0)
            }
            StepKind::Euler => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                let next = x + m.drift(x) * self.dt + m.diffusion(x) * self.dt.sqrt() * z;
                m.state_space.clamp(next)
            }
        }
    }

    /// Probability that a Brownian bridge from `(x0 − b0)` to `(x1 − b1)`,
    /// both on the same side, touched zero in between.
    fn cross_probability(&self, x0: f64, gap0: f64, gap1: f64) -> f64 {
        let s = self.model.diffusion(x0);
        let e = 2.0 * gap0 * gap1 / (s * s * self.dt);
        // below e^{-46} ≈ 1e-20 a crossing is never drawn in practice
        if e.is_nan() || e > 46.0 {
            0.0
        } else {
            (-e).exp()
        }
    }
}

/// A boundary sampled at the simulation steps; `±∞` when absent.
fn sample_boundary(b: Option<&Boundary>, n: usize, dt: f64, absent: f64) -> Vec<f64> {
    match b {
        Some(b) => (0..=n).map(|k| b.at(k as f64 * dt)).collect(),
        None => vec![absent; n + 1],
    }
}

fn steps_for(horizon: f64, steps_per_unit: usize) -> usize {
    ((horizon * steps_per_unit as f64).round() as usize).max(1)
}

/// Everything a path needs, precomputed once per run.
#[derive(Debug, Clone)]
pub(crate) struct PreparedRules {
    pub market: MarketSpec,
    entry_stepper: PathStepper,
    exit_stepper: PathStepper,
    n_entry: usize,
    n_exit: usize,
    long_entry: Vec<f64>,
    short_entry: Vec<f64>,
    long_level: f64,
    short_level: f64,
    long_exit: Vec<f64>,
    short_exit: Vec<f64>,
}

/// Side of the boundary the stopping region lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Region {
    /// Stop when `X ≤ b`.
    Below,
    /// Stop when `X ≥ b`.
    Above,
}

fn gap(region: Region, x: f64, b: f64) -> f64 {
    match region {
        Region::Below => x - b,
        Region::Above => b - x,
    }
}

/// Check for a stop at step `k` after moving from `prev` to `x`. Returns the fill price.
#[allow(clippy::too_many_arguments)]
fn check_stop<R: Rng + ?Sized>(stepper: &PathStepper, region: Region, b: &[f64], k: usize, prev: f64, x: f64, monitoring: Monitoring, rng: &mut R) -> Option<f64> {
    let g1 = gap(region, x, b[k]);
    match monitoring {
        Monitoring::Discrete => (g1 <= 0.0).then_some(x),
        Monitoring::BrownianBridge => {
            if g1 <= 0.0 {
                return Some(b[k]);
            }
            if k == 0 {
                return None;
            }
            let g0 = gap(region, prev, b[k - 1]);
            let p = stepper.cross_probability(prev, g0, g1);
            (p > 0.0 && rng.random::<f64>() < p).then_some(b[k])
        }
    }
}

impl PreparedRules {
    pub fn new(model: &ModelSpec, rules: &TradingRules, steps_per_unit: usize) -> Result<Self> {
        rules.validate()?;
        let market = rules.market;
        let n_entry = steps_for(market.deadline, steps_per_unit);
        let n_exit = steps_for(market.window, steps_per_unit);
        let (dt_e, dt_x) = (market.deadline / n_entry as f64, market.window / n_exit as f64);
        let long_on = rules.long_entry.is_some();
        let short_on = rules.short_entry.is_some();
        Ok(Self {
            market,
            entry_stepper: PathStepper::new(model, dt_e),
            exit_stepper: PathStepper::new(model, dt_x),
            n_entry,
            n_exit,
            long_entry: sample_boundary(rules.long_entry.as_ref(), n_entry, dt_e, f64::NEG_INFINITY),
            short_entry: sample_boundary(rules.short_entry.as_ref(), n_entry, dt_e, f64::INFINITY),
            long_level: if long_on { rules.long_level } else { f64::NEG_INFINITY },
            short_level: if short_on { rules.short_level } else { f64::INFINITY },
            long_exit: sample_boundary(rules.long_exit.as_ref(), n_exit, dt_x, f64::INFINITY),
            short_exit: sample_boundary(rules.short_exit.as_ref(), n_exit, dt_x, f64::NEG_INFINITY),
        })
    }

    /// Exit-only rules: a position is open at time 0.
    pub fn exit_only(model: &ModelSpec, market: &MarketSpec, position: Position, exit: &Boundary, steps_per_unit: usize) -> Result<Self> {
        let rules = TradingRules {
            strategy: match position {
                Position::Long => Strategy::LongShort,
                Position::Short => Strategy::ShortLong,
            },
            market: *market,
            long_entry: None,
            short_entry: None,
            long_level: f64::NEG_INFINITY,
            short_level: f64::INFINITY,
            long_exit: (position == Position::Long).then(|| exit.clone()),
            short_exit: (position == Position::Short).then(|| exit.clone()),
        };
        Self::new(model, &rules, steps_per_unit)
    }

    /// Run the exit window from `(start, x)`; returns the fill and whether it was forced.
    pub fn exit_phase<R: Rng + ?Sized>(&self, side: Position, start: f64, x0: f64, monitoring: Monitoring, rng: &mut R, mut path: Option<&mut Vec<(f64, f64)>>) -> (Fill, bool) {
        let (b, region) = match side {
            Position::Long => (&self.long_exit, Region::Above),
            Position::Short => (&self.short_exit, Region::Below),
        };
        let dt = self.market.window / self.n_exit as f64;
        if gap(region, x0, b[0]) <= 0.0 {
            return (Fill { time: start, price: x0 }, false);
        }
        let mut x = x0;
        for k in 1..=self.n_exit {
            let prev = x;
            x = self.exit_stepper.step(prev, rng);
            let t = start + k as f64 * dt;
            if let Some(p) = path.as_deref_mut() {
                p.push((t, x));
            }
            if let Some(price) = check_stop(&self.exit_stepper, region, b, k, prev, x, monitoring, rng) {
                return (Fill { time: t, price }, false);
            }
        }
        (Fill { time: start + self.market.window, price: x }, true)
    }

    /// Run the entry period from `x0` at time 0.
    pub fn entry_phase<R: Rng + ?Sized>(&self, x0: f64, monitoring: Monitoring, rng: &mut R, mut path: Option<&mut Vec<(f64, f64)>>) -> Option<(Position, Fill)> {
        let dt = self.market.deadline / self.n_entry as f64;
        let n = self.n_entry;
        if x0 <= self.long_entry[0] {
            return Some((Position::Long, Fill { time: 0.0, price: x0 }));
        }
        if x0 >= self.short_entry[0] {
            return Some((Position::Short, Fill { time: 0.0, price: x0 }));
        }
        let mut x = x0;
        for k in 1..=n {
            let prev = x;
            x = self.entry_stepper.step(prev, rng);
            let t = k as f64 * dt;
            if let Some(p) = path.as_deref_mut() {
                p.push((t, x));
            }
            if k == n {
                // the deadline: a crossing inside the last step still counts,
                // otherwise the payoff sign decides
                if monitoring == Monitoring::BrownianBridge {
                    if let Some(price) = check_stop(&self.entry_stepper, Region::Below, &self.long_entry, k, prev, x, monitoring, rng) {
                        return Some((Position::Long, Fill { time: t, price }));
                    }
                    if let Some(price) = check_stop(&self.entry_stepper, Region::Above, &self.short_entry, k, prev, x, monitoring, rng) {
                        return Some((Position::Short, Fill { time: t, price }));
                    }
                }
                if x < self.long_level {
                    return Some((Position::Long, Fill { time: t, price: x }));
                }
                if x > self.short_level {
                    return Some((Position::Short, Fill { time: t, price: x }));
                }
                return None;
            }
            if let Some(price) = check_stop(&self.entry_stepper, Region::Below, &self.long_entry, k, prev, x, monitoring, rng) {
                return Some((Position::Long, Fill { time: t, price }));
            }
            if let Some(price) = check_stop(&self.entry_stepper, Region::Above, &self.short_entry, k, prev, x, monitoring, rng) {
                return Some((Position::Short, Fill { time: t, price }));
            }
        }
        None
    }

    /// Entry then exit along one path.
    pub fn round_trip<R: Rng + ?Sized>(&self, x0: f64, monitoring: Monitoring, rng: &mut R, mut path: Option<&mut Vec<(f64, f64)>>) -> TradeRecord {
        let Some((side, entry)) = self.entry_phase(x0, monitoring, rng, path.as_deref_mut()) else {
            return TradeRecord::none();
        };
        let (exit, forced) = self.exit_phase(side, entry.time, entry.price, monitoring, rng, path);
        TradeRecord::round_trip(side, entry, exit, forced, &self.market)
    }
}

/// Simulate one round trip from `x0` with discrete monitoring.
///
/// The path starts with `(0, x0)` and ends at the exit (or the deadline
/// when nothing was entered).
pub fn simulate_round_trip<R: Rng + ?Sized>(
    model: &ModelSpec,
    rules: &TradingRules,
    x0: f64,
    steps_per_unit: usize,
    rng: &mut R,
) -> Result<(TradeRecord, Vec<(f64, f64)>)> {
    if steps_per_unit < 100 {
        return Err(Error::Argument(format!("need at least 100 steps per unit time, got {steps_per_unit}")));
    }
    model.check_state(x0)?;
    let prepared = PreparedRules::new(model, rules, steps_per_unit)?;
    let mut path = vec![(0.0, x0)];
    let record = prepared.round_trip(x0, Monitoring::Discrete, rng, Some(&mut path));
    Ok((record, path))
}

/// Simulate `n` independent round trips; path `i` uses stream `i` of a
/// ChaCha8 generator seeded with `seed`.
pub fn simulate_many(model: &ModelSpec, rules: &TradingRules, x0: f64, steps_per_unit: usize, n: usize, seed: u64) -> Result<Vec<TradeRecord>> {
    if steps_per_unit < 100 {
        return Err(Error::Argument(format!("need at least 100 steps per unit time, got {steps_per_unit}")));
    }
    model.check_state(x0)?;
    let prepared = PreparedRules::new(model, rules, steps_per_unit)?;
    Ok((0..n)
        .map(|i| prepared.round_trip(x0, Monitoring::Discrete, &mut path_rng(seed, i), None))
        .collect())
}

/// The generator for path `i`.
pub fn path_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Summary of a batch of round trips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnlSummary {
    pub count: usize,
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub entry_frequency: f64,
    /// Share of entered trades that were liquidated at the window end.
    pub forced_exit_frequency: f64,
    /// Mean `ζ − τ` over entered trades (0 when none entered).
    pub mean_holding_time: f64,
}

pub fn pnl_statistics(records: &[TradeRecord]) -> Result<PnlSummary> {
    if records.is_empty() {
        return Err(Error::Empty("trade records"));
    }
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.discounted_pnl).sum::<f64>() / n;
    let se = if records.len() > 1 {
        let ss: f64 = records.iter().map(|r| (r.discounted_pnl - mean).powi(2)).sum();
        (ss / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    let entered: Vec<&TradeRecord> = records.iter().filter(|r| r.entered).collect();
    let k = entered.len() as f64;
    let (forced, hold) = if entered.is_empty() {
        (0.0, 0.0)
    } else {
        let forced = entered.iter().filter(|r| r.forced_exit).count() as f64 / k;
        let hold = entered
            .iter()
            .map(|r| r.exit_time.unwrap_or(0.0) - r.entry_time.unwrap_or(0.0))
            .sum::<f64>()
            / k;
        (forced, hold)
    };
    Ok(PnlSummary {
        count: records.len(),
        mean,
        se,
        entry_frequency: k / n,
        forced_exit_frequency: forced,
        mean_holding_time: hold,
    })
}
