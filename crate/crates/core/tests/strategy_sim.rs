//! Round-trip simulation against the solved value functions, plus the
//! bookkeeping rules of the sequential deadlines.

use std::sync::OnceLock;

use meanrev::chooser::{solve_chooser, ChooserSolution};
use meanrev::entry::{solve_entry_long, EntrySolution, ValueTable, TABLE_POINTS};
use meanrev::exit::{solve_exit_long, solve_exit_short, Position};
use meanrev::model::{MarketSpec, ModelSpec};
use meanrev::oracles::mc::{mc_policy_value, Monitoring, Policy};
use meanrev::sim::{path_rng, pnl_statistics, simulate_many, simulate_round_trip, TradeRecord, TradingRules};
use meanrev::volterra::{SolverConfig, TimeGrid};

const N: usize = 500;
const X0: f64 = 0.54;

fn reference_model() -> ModelSpec {
    ModelSpec::ou(16.0, 0.54, 0.16).unwrap()
}

fn reference_market() -> MarketSpec {
    MarketSpec::new(0.01, 0.01, 1.0, 1.0).unwrap()
}

struct Solved {
    entry_long: EntrySolution,
    chooser: ChooserSolution,
}

fn solve(market: &MarketSpec) -> Solved {
    let m = reference_model();
    let cfg = SolverConfig::default();
    let gx = TimeGrid::new(market.window, N).unwrap();
    let ge = TimeGrid::new(market.deadline, N).unwrap();
    let exit_long = solve_exit_long(&m, market, &gx, &cfg).unwrap().into_solution().unwrap();
    let exit_short = solve_exit_short(&m, market, &gx, &cfg).unwrap().into_solution().unwrap();
    let long = ValueTable::new(&exit_long, TABLE_POINTS).unwrap();
    let short = ValueTable::new(&exit_short, TABLE_POINTS).unwrap();
    Solved {
        entry_long: solve_entry_long(&long, &ge, &cfg).unwrap().into_solution().unwrap(),
        chooser: solve_chooser(&long, &short, &ge, &cfg).unwrap().into_solution().unwrap(),
    }
}

fn reference() -> &'static Solved {
    static S: OnceLock<Solved> = OnceLock::new();
    S.get_or_init(|| solve(&reference_market()))
}

/// Discrete monitoring enters and exits late by a fraction of a step; at
/// 2000 steps per unit that bias is about 3.5 SE of a 10^5-path mean, so the
/// comparison runs on a ten times finer clock.
#[test]
fn long_short_pnl_matches_the_entry_value() {
    let s = reference();
    let rules = TradingRules::from_entry(&s.entry_long);
    let records = simulate_many(&reference_model(), &rules, X0, 20_000, 100_000, 2024).unwrap();
    let stats = pnl_statistics(&records).unwrap();
    let v = s.entry_long.value(0.0, X0).unwrap();
    let z = (stats.mean - v) / stats.se;
    assert!(z.abs() <= 3.0, "mean pnl {} (se {:.2e}) vs V = {v}: z = {z:.2}", stats.mean, stats.se);
}

#[test]
fn longer_window_forces_fewer_exits() {
    let model = reference_model();
    let frequency = |window: f64| {
        let market = reference_market().with_window(window).unwrap();
        let rules = TradingRules::from_entry(&solve(&market).entry_long);
        let records = simulate_many(&model, &rules, X0, 2000, 20_000, 5).unwrap();
        pnl_statistics(&records).unwrap().forced_exit_frequency
    };
    let (half, full) = (frequency(0.5), frequency(1.0));
    assert!(half > full, "forced exits: T' = 0.5 gives {half}, T' = 1 gives {full}");
}

#[test]
fn eager_entry_loses_value() {
    let s = reference();
    let rules = TradingRules::from_entry(&s.entry_long);
    let mut eager = rules.clone();
    eager.long_entry = eager.long_entry.map(|b| b.shifted(0.05));
    let model = reference_model();
    let run = |r: TradingRules| mc_policy_value(&Policy::RoundTrip(r), &model, X0, 1_000_000, 2000, 77, Monitoring::BrownianBridge).unwrap();
    let (base, shifted) = (run(rules), run(eager));
    assert!(shifted.mean < base.mean, "shifted {} (se {:.1e}) not below baseline {} (se {:.1e})", shifted.mean, shifted.se, base.mean, base.se);
}

fn entered_long_at(r: &TradeRecord) -> Option<f64> {
    (r.side == Some(Position::Long)).then(|| r.entry_time.unwrap())
}

/// The chooser's lower boundary sits below the long entry boundary, so a
/// shared entry after time 0 needs a step that jumps both; a coarse clock
/// makes those common.
#[test]
fn chooser_replays_the_long_strategy_on_shared_entries() {
    let s = reference();
    let model = reference_model();
    let chooser = TradingRules::from_chooser(&s.chooser);
    let single = TradingRules::from_entry(&s.entry_long);
    let (mut at_start, mut later) = (0, 0);
    for x0 in [0.45, 0.54] {
        for i in 0..2000 {
            let (a, _) = simulate_round_trip(&model, &chooser, x0, 200, &mut path_rng(31, i)).unwrap();
            let (b, _) = simulate_round_trip(&model, &single, x0, 200, &mut path_rng(31, i)).unwrap();
            if let (Some(ta), Some(tb)) = (entered_long_at(&a), entered_long_at(&b)) {
                if ta == tb {
                    assert_eq!(a, b, "path {i} from {x0}");
                    if ta == 0.0 {
                        at_start += 1;
                    } else {
                        later += 1;
                    }
                }
            }
        }
    }
    // every path from 0.45 starts inside both long entry regions
    assert_eq!(at_start, 2000);
    assert!(later > 50, "only {later} shared entries after time 0");
}

#[test]
fn exit_window_runs_from_the_entry_time() {
    let s = reference();
    let market = reference_market();
    let rules = TradingRules::from_entry(&s.entry_long);
    let records = simulate_many(&reference_model(), &rules, X0, 2000, 20_000, 9).unwrap();
    let entered: Vec<&TradeRecord> = records.iter().filter(|r| r.entered).collect();
    assert!(entered.len() > 1000);
    let mut entry_times = Vec::new();
    for r in &entered {
        let (tau, zeta) = (r.entry_time.unwrap(), r.exit_time.unwrap());
        assert!(tau <= market.deadline && zeta <= tau + market.window + 1e-12);
        if r.forced_exit {
            assert!((zeta - tau - market.window).abs() <= 1e-12, "forced exit after {} from tau = {tau}", zeta - tau);
            entry_times.push(tau);
        }
    }
    // forced exits from different entry times all hold for the full window,
    // so some of them end after the entry deadline
    entry_times.sort_by(f64::total_cmp);
    assert!(entry_times.len() > 10);
    assert!(entry_times.last().unwrap() - entry_times[0] > 0.1);
    assert!(entered.iter().any(|r| r.exit_time.unwrap() > market.deadline));
}
