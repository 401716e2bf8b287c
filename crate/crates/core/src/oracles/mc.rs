//! Monte Carlo values of fixed policies, and a boundary-perturbation check
//! that a solved boundary beats its shifted copies.

use serde::{Deserialize, Serialize};

use crate::chooser::ChooserSolution;
use crate::entry::EntrySolution;
use crate::error::{Error, Result};
use crate::exit::{ExitSolution, Position};
use crate::model::{MarketSpec, ModelSpec};
use crate::sim::{path_rng, PreparedRules, TradingRules};
use crate::volterra::Boundary;

pub use crate::sim::Monitoring;

/// Smallest accepted path count.
pub const MIN_PATHS: usize = 10_000;
/// Time steps per unit time used by the acceptance runs.
pub const DEFAULT_STEPS_PER_UNIT: usize = 2000;

/// A fixed trading policy.
#[derive(Debug, Clone)]
pub enum Policy {
    /// A position open at time 0, closed on the exit boundary or at `T′`.
    /// The payoff is `e^{−rζ}(X_ζ − c)` (long) or the buy-back cost
    /// `e^{−rζ}(X_ζ + c)` (short).
    Exit {
        position: Position,
        market: MarketSpec,
        boundary: Boundary,
    },
    /// Entry by the deadline, then exit; the payoff is the discounted round-trip pnl.
    RoundTrip(TradingRules),
}

impl Policy {
    pub fn from_exit(sol: &ExitSolution) -> Self {
        Policy::Exit {
            position: sol.position(),
            market: *sol.market(),
            boundary: sol.boundary.clone(),
        }
    }

    pub fn from_entry(sol: &EntrySolution) -> Self {
        Policy::RoundTrip(TradingRules::from_entry(sol))
    }

    pub fn from_chooser(sol: &ChooserSolution) -> Self {
        Policy::RoundTrip(TradingRules::from_chooser(sol))
    }

    /// Whether the policy maximises its payoff (only the short exit minimises a cost).
    pub fn maximises(&self) -> bool {
        !matches!(
            self,
            Policy::Exit {
                position: Position::Short,
                ..
            }
        )
    }

    /// Labels of the boundaries that [`perturbation_optimality_test`] shifts.
    fn decision_boundaries(&self) -> Vec<&'static str> {
        match self {
            Policy::Exit { .. } => vec!["exit"],
            Policy::RoundTrip(r) => {
                let mut v = Vec::new();
                if r.long_entry.is_some() {
                    v.push("long entry");
                }
                if r.short_entry.is_some() {
                    v.push("short entry");
                }
                v
            }
        }
    }

    fn shifted(&self, which: &str, delta: f64) -> Self {
        let mut p = self.clone();
        match (&mut p, which) {
            (Policy::Exit { boundary, .. }, "exit") => *boundary = boundary.shifted(delta),
            (Policy::RoundTrip(r), "long entry") => r.long_entry = r.long_entry.as_ref().map(|b| b.shifted(delta)),
            (Policy::RoundTrip(r), "short entry") => r.short_entry = r.short_entry.as_ref().map(|b| b.shifted(delta)),
            _ => unreachable!("unknown boundary label {which}"),
        }
        p
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub n_paths: usize,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se
    }
}

/// Discounted payoff of every path, path `i` drawn from stream `i`.
fn path_payoffs(policy: &Policy, model: &ModelSpec, x0: f64, n_paths: usize, steps_per_unit: usize, seed: u64, monitoring: Monitoring) -> Result<Vec<f64>> {
    let run: Box<dyn Fn(usize) -> f64 + Sync> = match policy {
        Policy::Exit {
            position,
            market,
            boundary,
        } => {
            let prepared = PreparedRules::exit_only(model, market, *position, boundary, steps_per_unit)?;
            let (r, c, pos) = (market.r, market.c, *position);
            Box::new(move |i| {
                let (fill, _) = prepared.exit_phase(pos, 0.0, x0, monitoring, &mut path_rng(seed, i), None);
                let cost = if pos == Position::Long { -c } else { c };
                (-r * fill.time).exp() * (fill.price + cost)
            })
        }
        Policy::RoundTrip(rules) => {
            let prepared = PreparedRules::new(model, rules, steps_per_unit)?;
            Box::new(move |i| prepared.round_trip(x0, monitoring, &mut path_rng(seed, i), None).discounted_pnl)
        }
    };
    let mut out = vec![0.0; n_paths];
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let chunk = n_paths.div_ceil(threads).max(1);
    std::thread::scope(|s| {
        for (k, slot) in out.chunks_mut(chunk).enumerate() {
            let run = &run;
            s.spawn(move || {
                for (j, v) in slot.iter_mut().enumerate() {
                    *v = run(k * chunk + j);
                }
            });
        }
    });
    Ok(out)
}

/// Monte Carlo value of `policy` started at `x0`.
///
/// Paths use exact transitions for OU and CIR and clamped Euler steps
/// otherwise. The result depends only on the arguments, not on the number of
/// threads.
pub fn mc_policy_value(
    policy: &Policy,
    model: &ModelSpec,
    x0: f64,
    n_paths: usize,
    steps_per_unit: usize,
    seed: u64,
    monitoring: Monitoring,
) -> Result<McEstimate> {
    if n_paths < MIN_PATHS {
        return Err(Error::Argument(format!("need at least {MIN_PATHS} paths, got {n_paths}")));
    }
    if steps_per_unit < 100 {
        return Err(Error::Argument(format!("need at least 100 steps per unit time, got {steps_per_unit}")));
    }
    model.check_state(x0)?;
    let v = path_payoffs(policy, model, x0, n_paths, steps_per_unit, seed, monitoring)?;
    let n = n_paths as f64;
    // centre on the first path so a constant payoff comes back exactly
    let shift = v[0];
    let mean = shift + v.iter().map(|p| p - shift).sum::<f64>() / n;
    let var = v.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate {
        mean,
        se: (var / n).sqrt(),
        n_paths,
    })
}

/// One shifted-boundary run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedRun {
    pub boundary: String,
    pub shift: f64,
    pub estimate: McEstimate,
    /// The shifted policy does not beat the baseline by more than 3 SE.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub baseline: McEstimate,
    pub maximises: bool,
    pub runs: Vec<PerturbedRun>,
    pub passed: bool,
}

/// Shift each decision boundary of `policy` by `±delta` and compare with the
/// baseline on the same seed: a maximising policy passes when every shifted
/// estimate is at most baseline + 3 SE (at least baseline − 3 SE for the
/// short exit's cost).
#[allow(clippy::too_many_arguments)]
pub fn perturbation_optimality_test(
    policy: &Policy,
    model: &ModelSpec,
    x0: f64,
    delta: f64,
    n_paths: usize,
    steps_per_unit: usize,
    seed: u64,
    monitoring: Monitoring,
) -> Result<PerturbationReport> {
    if !delta.is_finite() {
        return Err(Error::Argument(format!("perturbation must be finite, got {delta}")));
    }
    let baseline = mc_policy_value(policy, model, x0, n_paths, steps_per_unit, seed, monitoring)?;
    let maximises = policy.maximises();
    let mut runs = Vec::new();
    for which in policy.decision_boundaries() {
        for shift in [delta, -delta] {
            let estimate = mc_policy_value(&policy.shifted(which, shift), model, x0, n_paths, steps_per_unit, seed, monitoring)?;
            let consistent = if maximises {
                estimate.mean <= baseline.mean + 3.0 * baseline.se
            } else {
                estimate.mean >= baseline.mean - 3.0 * baseline.se
            };
            runs.push(PerturbedRun {
                boundary: which.to_string(),
                shift,
                estimate,
                consistent,
            });
        }
    }
    let passed = runs.iter().all(|r| r.consistent);
    Ok(PerturbationReport {
        baseline,
        maximises,
        runs,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mean_m;
    use crate::sim::Strategy;
    use crate::volterra::{Monotonicity, TimeGrid};
    use approx::assert_abs_diff_eq;

    fn reference() -> (ModelSpec, MarketSpec) {
        (
            ModelSpec::ou(16.0, 0.54, 0.16).unwrap(),
            MarketSpec::new(0.01, 0.01, 1.0, 1.0).unwrap(),
        )
    }

    fn flat(h: f64, v: f64) -> Boundary {
        Boundary::constant(TimeGrid::new(h, 10).unwrap(), v, Monotonicity::Decreasing)
    }

    fn exit_policy(market: MarketSpec, level: f64) -> Policy {
        Policy::Exit {
            position: Position::Long,
            market,
            boundary: flat(market.window, level),
        }
    }

    #[test]
    fn never_entering_is_worth_zero() {
        let (m, mk) = reference();
        let rules = TradingRules {
            strategy: Strategy::LongShort,
            market: mk,
            long_entry: Some(flat(mk.deadline, f64::NEG_INFINITY)),
            short_entry: None,
            long_level: f64::NEG_INFINITY,
            short_level: f64::INFINITY,
            long_exit: Some(flat(mk.window, 0.56)),
            short_exit: None,
        };
        for mon in [Monitoring::Discrete, Monitoring::BrownianBridge] {
            let e = mc_policy_value(&Policy::RoundTrip(rules.clone()), &m, 0.54, MIN_PATHS, 200, 1, mon).unwrap();
            assert_eq!((e.mean, e.se), (0.0, 0.0));
        }
    }

    #[test]
    fn immediate_exit_pays_the_payoff() {
        let (m, mk) = reference();
        let e = mc_policy_value(&exit_policy(mk, f64::NEG_INFINITY), &m, 0.52, MIN_PATHS, 200, 1, Monitoring::Discrete).unwrap();
        assert_eq!(e.mean, 0.52 - mk.c);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn forced_exit_matches_discounted_mean() {
        let (m, mk) = reference();
        let e = mc_policy_value(&exit_policy(mk, f64::INFINITY), &m, 0.50, 40_000, 200, 7, Monitoring::Discrete).unwrap();
        let exact = (-mk.r * mk.window).exp() * (mean_m(&m, mk.window, 0.50).unwrap() - mk.c);
        assert!(e.agrees_with(exact, 3.0), "{e:?} vs {exact}");
        assert!(e.se > 0.0);
    }

    #[test]
    fn estimates_are_reproducible() {
        let (m, mk) = reference();
        let p = exit_policy(mk, 0.57);
        let a = mc_policy_value(&p, &m, 0.54, MIN_PATHS, 500, 11, Monitoring::BrownianBridge).unwrap();
        let b = mc_policy_value(&p, &m, 0.54, MIN_PATHS, 500, 11, Monitoring::BrownianBridge).unwrap();
        assert_eq!(a, b);
        let c = mc_policy_value(&p, &m, 0.54, MIN_PATHS, 500, 12, Monitoring::BrownianBridge).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn zero_perturbation_reproduces_baseline() {
        let (m, mk) = reference();
        let rep = perturbation_optimality_test(&exit_policy(mk, 0.57), &m, 0.54, 0.0, MIN_PATHS, 200, 5, Monitoring::Discrete).unwrap();
        assert_eq!(rep.runs.len(), 2);
        for r in &rep.runs {
            assert_eq!(r.estimate, rep.baseline);
        }
        assert!(rep.passed);
    }

    #[test]
    fn bridge_catches_crossings_missed_between_steps() {
        let (m, mk) = reference();
        // with coarse steps, discrete monitoring sells above the level on
        // average while the bridge sells at the level
        let p = exit_policy(mk, 0.56);
        let d = mc_policy_value(&p, &m, 0.54, 20_000, 100, 3, Monitoring::Discrete).unwrap();
        let b = mc_policy_value(&p, &m, 0.54, 20_000, 100, 3, Monitoring::BrownianBridge).unwrap();
        assert!(d.mean > b.mean);
        assert_abs_diff_eq!(b.mean, (0.56 - mk.c) * (-mk.r * 0.05f64).exp(), epsilon = 2e-3);
    }

    #[test]
    fn argument_checks() {
        let (m, mk) = reference();
        let p = exit_policy(mk, 0.57);
        assert!(mc_policy_value(&p, &m, 0.54, MIN_PATHS - 1, 200, 0, Monitoring::Discrete).is_err());
        assert!(mc_policy_value(&p, &m, 0.54, MIN_PATHS, 50, 0, Monitoring::Discrete).is_err());
        assert!(perturbation_optimality_test(&p, &m, 0.54, f64::NAN, MIN_PATHS, 200, 0, Monitoring::Discrete).is_err());
    }
}
