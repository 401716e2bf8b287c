//! One function per subcommand.

use std::path::{Path, PathBuf};

use meanrev::chooser::{solve_chooser, ChooserSolution};
use meanrev::config::RunConfig;
use meanrev::entry::{solve_entry_long, solve_entry_short, EntrySolution, ValueTable};
use meanrev::exit::{solve_exit_long, solve_exit_short, ExitSolution, Position};
use meanrev::model::{critical_levels, DegeneratePolicy, MarketSpec, ModelSpec, Outcome, Problem, Regime};
use meanrev::oracles::fd::{fd_entry, fd_exit, FdSolution};
use meanrev::oracles::mc::{mc_policy_value, perturbation_optimality_test, McEstimate, Policy};
use meanrev::report::{Cell, RunSummary, Table};
use meanrev::sim::{path_rng, pnl_statistics, simulate_many, simulate_round_trip, Strategy, TradingRules};
use meanrev::volterra::{BoundaryEquation, CoupledEquation, SolverConfig, TimeGrid};

use crate::args::Command;
use crate::error::{CliError, CliResult};
use crate::output::{boundary_table, resolve_dir, Output};

/// Probe-grid tolerance between the integral-equation and FD values.
const FD_VALUE_TOL: f64 = 1e-3;
/// Tolerance on the FD exercise frontier against the exit boundary.
const FD_FRONTIER_TOL: f64 = 2e-3;
/// Monte Carlo agreement, in standard errors.
const MC_SE: f64 = 3.0;

pub fn dispatch(command: &Command, rc: &RunConfig, out_dir: Option<&Path>) -> CliResult<PathBuf> {
    let ctx = Ctx::new(rc)?;
    let out = Output::create(resolve_dir(rc, out_dir), rc)?;
    let name = command.name();
    match command {
        Command::SolveExit { side } => solve_exit(&ctx, out, name, (*side).into()),
        Command::SolveEntry { side } => solve_entry(&ctx, out, name, (*side).into()),
        Command::SolveChooser => solve_chooser_cmd(&ctx, out, name),
        Command::Simulate {
            strategy,
            paths,
            seed,
            x0,
            steps_per_unit,
        } => simulate(
            &ctx,
            out,
            name,
            (*strategy).into(),
            *paths,
            seed.unwrap_or(rc.verification.seed),
            x0.unwrap_or(rc.x0()),
            steps_per_unit.unwrap_or(rc.verification.steps_per_unit),
        ),
        Command::Verify { problem } => {
            let problems: Vec<Problem> = if problem.is_empty() {
                Problem::ALL.to_vec()
            } else {
                problem.iter().map(|&p| p.into()).collect()
            };
            verify(&ctx, out, name, &problems)
        }
        Command::Sweep {
            strategy,
            deadline_sweep,
            x0,
        } => sweep(&ctx, out, name, (*strategy).into(), deadline_sweep, x0.unwrap_or(rc.x0())),
    }
}

struct Ctx<'a> {
    rc: &'a RunConfig,
    model: ModelSpec,
    market: MarketSpec,
    solver: SolverConfig,
}

impl<'a> Ctx<'a> {
    fn new(rc: &'a RunConfig) -> CliResult<Self> {
        let solver = rc.solver_config();
        solver.validate()?;
        Ok(Self {
            rc,
            model: rc.model_spec()?,
            market: rc.market_spec()?,
            solver,
        })
    }

    fn summary(&self) -> RunSummary {
        let lv = critical_levels(&self.model, &self.market);
        RunSummary {
            x_star: lv.upper,
            x_lower_star: lv.lower,
            ..RunSummary::default()
        }
    }

    fn exit(&self, position: Position) -> CliResult<Outcome<ExitSolution>> {
        let grid = self.rc.exit_grid()?;
        Ok(match position {
            Position::Long => solve_exit_long(&self.model, &self.market, &grid, &self.solver)?,
            Position::Short => solve_exit_short(&self.model, &self.market, &grid, &self.solver)?,
        })
    }

    fn table(&self, position: Position) -> CliResult<ValueTable> {
        let exit = self.exit(position)?.into_solution()?;
        Ok(ValueTable::new(&exit, self.rc.solver.table_points)?)
    }

    fn entry(&self, table: &ValueTable, grid: &TimeGrid) -> CliResult<Outcome<EntrySolution>> {
        Ok(match table.exit.position() {
            Position::Long => solve_entry_long(table, grid, &self.solver)?,
            Position::Short => solve_entry_short(table, grid, &self.solver)?,
        })
    }

    fn residual_max<E: BoundaryEquation>(&self, eq: &E, residuals: impl Fn(meanrev::volterra::TimeQuadrature) -> meanrev::Result<Vec<(usize, f64)>>) -> CliResult<f64> {
        let rule = self.solver.quadrature.unwrap_or(eq.preferred_quadrature());
        Ok(residuals(rule)?.iter().fold(0.0, |m, &(_, r)| m.max(r.abs())))
    }

    /// `t, x, value` on `value_nt + 1` times over `[0, horizon]` and
    /// `value_nx` prices around θ, keeping prices inside the state space.
    fn value_table(&self, horizon: f64, value: impl Fn(f64, f64) -> meanrev::Result<f64>) -> CliResult<Table> {
        let o = &self.rc.output;
        let half = o.value_width_sd * self.model.scale();
        let xs: Vec<f64> = (0..o.value_nx)
            .map(|j| self.model.theta - half + 2.0 * half * j as f64 / (o.value_nx - 1).max(1) as f64)
            .filter(|&x| self.model.state_space.contains(x))
            .collect();
        let mut table = Table::new(&["t", "x", "value"]);
        for i in 0..=o.value_nt {
            let t = horizon * i as f64 / o.value_nt.max(1) as f64;
            for &x in &xs {
                table.push(vec![t.into(), x.into(), value(t, x)?.into()])?;
            }
        }
        Ok(table)
    }
}

fn side_name(p: Position) -> &'static str {
    match p {
        Position::Long => "long",
        Position::Short => "short",
    }
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::NonDegenerate => "non-degenerate",
        Regime::StopImmediately => "stop-immediately",
        Regime::WaitUntilDeadline => "wait-until-deadline",
    }
}

/// Manifest for a problem whose policy is trivial: the regime and no data files.
fn degenerate(out: Output, command: &str, mut summary: RunSummary, policy: DegeneratePolicy) -> CliResult<PathBuf> {
    summary.problem = Some(policy.problem.name().into());
    summary.regime = Some(regime_name(policy.regime).into());
    out.finish(command, summary)
}

fn solve_exit(ctx: &Ctx, mut out: Output, command: &str, position: Position) -> CliResult<PathBuf> {
    let mut summary = ctx.summary();
    let sol = match ctx.exit(position)? {
        Outcome::Degenerate(p) => return degenerate(out, command, summary, p),
        Outcome::Solved(s) => s,
    };
    let side = side_name(position);
    out.table(&format!("exit_{side}_boundary"), &boundary_table(&sol.boundary, None))?;
    out.table(&format!("exit_{side}_value"), &ctx.value_table(ctx.market.window, |t, x| sol.value(t, x))?)?;
    summary.problem = Some(position.exit_problem().name().into());
    summary.residual_max = Some(ctx.residual_max(&sol.equation, |q| sol.residuals(q))?);
    summary.terminal_values = vec![sol.boundary.terminal_value];
    out.finish(command, summary)
}

fn solve_entry(ctx: &Ctx, mut out: Output, command: &str, position: Position) -> CliResult<PathBuf> {
    let mut summary = ctx.summary();
    let exit = match ctx.exit(position)? {
        Outcome::Degenerate(p) => return degenerate(out, command, summary, p),
        Outcome::Solved(s) => s,
    };
    let table = ValueTable::new(&exit, ctx.rc.solver.table_points)?;
    let sol = match ctx.entry(&table, &ctx.rc.entry_grid()?)? {
        Outcome::Degenerate(p) => return degenerate(out, command, summary, p),
        Outcome::Solved(s) => s,
    };
    let side = side_name(position);
    out.table(&format!("entry_{side}_boundary"), &boundary_table(&sol.boundary, None))?;
    out.table(&format!("exit_{side}_boundary"), &boundary_table(&exit.boundary, None))?;
    out.table(&format!("entry_{side}_value"), &ctx.value_table(ctx.market.deadline, |t, x| sol.value(t, x))?)?;
    let r_entry = ctx.residual_max(&sol.equation, |q| sol.residuals(q))?;
    let r_exit = ctx.residual_max(&exit.equation, |q| exit.residuals(q))?;
    summary.problem = Some(position.entry_problem().name().into());
    summary.residual_max = Some(r_entry.max(r_exit));
    summary.terminal_values = vec![sol.boundary.terminal_value, exit.boundary.terminal_value];
    match position {
        Position::Long => summary.gamma_long = Some(sol.gamma()),
        Position::Short => summary.gamma_short = Some(sol.gamma()),
    }
    out.finish(command, summary)
}

fn chooser_outcome(ctx: &Ctx, long: &ValueTable, short: &ValueTable, grid: &TimeGrid) -> CliResult<Outcome<ChooserSolution>> {
    Ok(solve_chooser(long, short, grid, &ctx.solver)?)
}

fn solve_chooser_cmd(ctx: &Ctx, mut out: Output, command: &str) -> CliResult<PathBuf> {
    let mut summary = ctx.summary();
    let mut exits = Vec::new();
    for p in [Position::Long, Position::Short] {
        match ctx.exit(p)? {
            Outcome::Degenerate(d) => return degenerate(out, command, summary, d),
            Outcome::Solved(s) => exits.push(s),
        }
    }
    let long = ValueTable::new(&exits[0], ctx.rc.solver.table_points)?;
    let short = ValueTable::new(&exits[1], ctx.rc.solver.table_points)?;
    let sol = match chooser_outcome(ctx, &long, &short, &ctx.rc.entry_grid()?)? {
        Outcome::Degenerate(p) => return degenerate(out, command, summary, p),
        Outcome::Solved(s) => s,
    };
    out.table("chooser_boundary", &boundary_table(&sol.lower, Some(&sol.upper)))?;
    out.table("chooser_value", &ctx.value_table(ctx.market.deadline, |t, x| sol.value(t, x))?)?;
    let rule = ctx.solver.quadrature.unwrap_or(sol.equation.preferred_quadrature());
    let residual = sol
        .residuals(rule)?
        .iter()
        .fold(0.0_f64, |m, &(_, a, b)| m.max(a.abs()).max(b.abs()));
    let th = sol.thresholds();
    summary.problem = Some(Problem::Chooser.name().into());
    summary.residual_max = Some(residual);
    summary.terminal_values = vec![sol.lower.terminal_value, sol.upper.terminal_value];
    summary.gamma_long = Some(th.gamma_long);
    summary.gamma_short = Some(th.gamma_short);
    summary.m = Some(th.m);
    out.finish(command, summary)
}

fn trading_rules(ctx: &Ctx, strategy: Strategy) -> CliResult<TradingRules> {
    let grid = ctx.rc.entry_grid()?;
    Ok(match strategy {
        Strategy::LongShort => TradingRules::from_entry(&ctx.entry(&ctx.table(Position::Long)?, &grid)?.into_solution()?),
        Strategy::ShortLong => TradingRules::from_entry(&ctx.entry(&ctx.table(Position::Short)?, &grid)?.into_solution()?),
        Strategy::Chooser => {
            let (long, short) = (ctx.table(Position::Long)?, ctx.table(Position::Short)?);
            TradingRules::from_chooser(&chooser_outcome(ctx, &long, &short, &grid)?.into_solution()?)
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    ctx: &Ctx,
    mut out: Output,
    command: &str,
    strategy: Strategy,
    paths: usize,
    seed: u64,
    x0: f64,
    steps_per_unit: usize,
) -> CliResult<PathBuf> {
    if paths == 0 {
        return Err(CliError::config("--paths must be at least 1"));
    }
    let rules = trading_rules(ctx, strategy)?;
    let records = simulate_many(&ctx.model, &rules, x0, steps_per_unit, paths, seed)?;
    let (_, path) = simulate_round_trip(&ctx.model, &rules, x0, steps_per_unit, &mut path_rng(seed, 0))?;

    let mut pt = Table::new(&["t", "x"]);
    for (t, x) in path {
        pt.push(vec![t.into(), x.into()])?;
    }
    out.table("path", &pt)?;

    let mut tt = Table::new(&[
        "path",
        "entered",
        "side",
        "entry_time",
        "entry_price",
        "exit_time",
        "exit_price",
        "forced_exit",
        "discounted_pnl",
    ]);
    for (i, r) in records.iter().enumerate() {
        tt.push(vec![
            Cell::Text(i.to_string()),
            r.entered.into(),
            r.side.map_or(Cell::Empty, |s| side_name(s).into()),
            r.entry_time.into(),
            r.entry_price.into(),
            r.exit_time.into(),
            r.exit_price.into(),
            r.forced_exit.into(),
            r.discounted_pnl.into(),
        ])?;
    }
    out.table("trades", &tt)?;

    let mut summary = ctx.summary();
    summary.pnl = Some(pnl_statistics(&records)?);
    out.finish(command, summary)
}

/// A solved problem with its value function and MC policy.
#[allow(clippy::large_enum_variant)]
enum Solved {
    Exit(ExitSolution),
    Entry(EntrySolution),
    Chooser(ChooserSolution),
}

impl Solved {
    fn value(&self, t: f64, x: f64) -> meanrev::Result<f64> {
        match self {
            Solved::Exit(s) => s.value(t, x),
            Solved::Entry(s) => s.value(t, x),
            Solved::Chooser(s) => s.value(t, x),
        }
    }

    fn policy(&self) -> Policy {
        match self {
            Solved::Exit(s) => Policy::from_exit(s),
            Solved::Entry(s) => Policy::from_entry(s),
            Solved::Chooser(s) => Policy::from_chooser(s),
        }
    }

    /// Exit boundary and whether it is the upper frontier, for FD comparison.
    fn exit_frontier(&self) -> Option<(&ExitSolution, bool)> {
        match self {
            Solved::Exit(s) => Some((s, s.position() == Position::Long)),
            _ => None,
        }
    }
}

fn solve_problem(ctx: &Ctx, problem: Problem) -> CliResult<Solved> {
    let grid = ctx.rc.entry_grid()?;
    Ok(match problem {
        Problem::ExitLong => Solved::Exit(ctx.exit(Position::Long)?.into_solution()?),
        Problem::ExitShort => Solved::Exit(ctx.exit(Position::Short)?.into_solution()?),
        Problem::EntryLong => Solved::Entry(ctx.entry(&ctx.table(Position::Long)?, &grid)?.into_solution()?),
        Problem::EntryShort => Solved::Entry(ctx.entry(&ctx.table(Position::Short)?, &grid)?.into_solution()?),
        Problem::Chooser => {
            let (long, short) = (ctx.table(Position::Long)?, ctx.table(Position::Short)?);
            Solved::Chooser(chooser_outcome(ctx, &long, &short, &grid)?.into_solution()?)
        }
    })
}

/// FD exits computed at most once per run.
struct FdCache<'c, 'a> {
    ctx: &'c Ctx<'a>,
    long: Option<FdSolution>,
    short: Option<FdSolution>,
}

impl FdCache<'_, '_> {
    fn exit(&mut self, position: Position) -> CliResult<FdSolution> {
        let slot = match position {
            Position::Long => &mut self.long,
            Position::Short => &mut self.short,
        };
        if slot.is_none() {
            let c = self.ctx;
            *slot = Some(fd_exit(position, &c.model, &c.market, &c.rc.fd_grid()?, &c.rc.fd_config())?);
        }
        Ok(slot.clone().expect("filled above"))
    }

    fn solve(&mut self, problem: Problem) -> CliResult<FdSolution> {
        let c = self.ctx;
        let cfg = c.rc.fd_config();
        Ok(match problem {
            Problem::ExitLong => self.exit(Position::Long)?,
            Problem::ExitShort => self.exit(Position::Short)?,
            Problem::EntryLong => fd_entry(problem, &c.model, &c.market, Some(&self.exit(Position::Long)?), None, &cfg)?,
            Problem::EntryShort => fd_entry(problem, &c.model, &c.market, None, Some(&self.exit(Position::Short)?), &cfg)?,
            Problem::Chooser => {
                let (l, s) = (self.exit(Position::Long)?, self.exit(Position::Short)?);
                fd_entry(problem, &c.model, &c.market, Some(&l), Some(&s), &cfg)?
            }
        })
    }
}

/// Oracle-comparison rows plus the failed ones.
struct Report {
    table: Table,
    failures: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Self {
            table: Table::new(&["method", "quantity", "value", "reference", "tolerance", "pass"]),
            failures: Vec::new(),
        }
    }

    fn row(&mut self, method: &str, quantity: String, value: f64, reference: f64, tolerance: f64, pass: bool) -> CliResult<()> {
        if !pass {
            self.failures.push(format!("{method} {quantity}"));
        }
        self.table.push(vec![
            method.into(),
            Cell::Text(quantity),
            value.into(),
            reference.into(),
            tolerance.into(),
            pass.into(),
        ])?;
        Ok(())
    }

    fn mc(&mut self, name: &str, est: &McEstimate, value: f64) -> CliResult<()> {
        let pass = est.agrees_with(value, MC_SE);
        self.row("mc", format!("{name} value at x0"), est.mean, value, MC_SE * est.se, pass)
    }
}

fn verify(ctx: &Ctx, mut out: Output, command: &str, problems: &[Problem]) -> CliResult<PathBuf> {
    let v = &ctx.rc.verification;
    let x0 = ctx.rc.x0();
    let mut report = Report::new();
    let mut fd = FdCache {
        ctx,
        long: None,
        short: None,
    };
    for &p in problems {
        let sol = solve_problem(ctx, p)?;
        let name = p.name();
        if v.fd {
            let f = fd.solve(p)?;
            let d = f.probe_difference(&ctx.model, 20, 20, 3.0, &|t, x| sol.value(t, x))?;
            report.row("fd", format!("{name} probe sup |ie - fd|"), d, 0.0, FD_VALUE_TOL, d <= FD_VALUE_TOL)?;
            if let Some((exit, upper)) = sol.exit_frontier() {
                let (sup, missing) = f.frontier_difference(upper, &|t| exit.boundary.at(t), 0.95 * ctx.market.window);
                let pass = missing == 0 && sup <= FD_FRONTIER_TOL;
                report.row("fd", format!("{name} boundary sup diff"), sup, 0.0, FD_FRONTIER_TOL, pass)?;
            }
        }
        let policy = sol.policy();
        let value = sol.value(0.0, x0)?;
        if v.perturbation {
            let rep = perturbation_optimality_test(&policy, &ctx.model, x0, v.shift, v.n_paths, v.steps_per_unit, v.seed, v.monitoring)?;
            if v.mc {
                report.mc(name, &rep.baseline, value)?;
            }
            let tol = MC_SE * rep.baseline.se;
            for run in &rep.runs {
                let quantity = format!("{name} {} shift {:+}", run.boundary, run.shift);
                report.row("perturbation", quantity, run.estimate.mean, rep.baseline.mean, tol, run.consistent)?;
            }
        } else if v.mc {
            let est = mc_policy_value(&policy, &ctx.model, x0, v.n_paths, v.steps_per_unit, v.seed, v.monitoring)?;
            report.mc(name, &est, value)?;
        }
    }
    out.table("verification_report", &report.table)?;
    let mut summary = ctx.summary();
    summary.verification_passed = Some(report.failures.is_empty());
    let manifest = out.finish(command, summary)?;
    if report.failures.is_empty() {
        Ok(manifest)
    } else {
        let n = report.failures.len();
        Err(CliError::verification(format!("{n} check(s) failed: {}", report.failures.join("; "))))
    }
}

fn sweep(ctx: &Ctx, mut out: Output, command: &str, strategy: Strategy, deadlines: &[f64], x0: f64) -> CliResult<PathBuf> {
    if deadlines.is_empty() {
        return Err(CliError::config("--deadline-sweep needs at least one deadline"));
    }
    let base = ctx.market.deadline;
    let steps_for = |t: f64| ((ctx.rc.solver.n_steps as f64 * t / base).round() as usize).max(1);
    let long = matches!(strategy, Strategy::LongShort | Strategy::Chooser)
        .then(|| ctx.table(Position::Long))
        .transpose()?;
    let short = matches!(strategy, Strategy::ShortLong | Strategy::Chooser)
        .then(|| ctx.table(Position::Short))
        .transpose()?;
    let header: &[&str] = if strategy == Strategy::Chooser {
        &["T", "value", "long_short"]
    } else {
        &["T", "value"]
    };
    let mut table = Table::new(header);
    for &t in deadlines {
        let grid = TimeGrid::new(t, steps_for(t))?;
        let entry_value = |tab: &ValueTable| -> CliResult<f64> { Ok(ctx.entry(&tab.with_deadline(t)?, &grid)?.into_solution()?.value(0.0, x0)?) };
        let row: Vec<Cell> = match strategy {
            Strategy::LongShort => vec![t.into(), entry_value(long.as_ref().expect("long table"))?.into()],
            Strategy::ShortLong => vec![t.into(), entry_value(short.as_ref().expect("short table"))?.into()],
            Strategy::Chooser => {
                let (l, s) = (long.as_ref().expect("long table"), short.as_ref().expect("short table"));
                let sol = chooser_outcome(ctx, &l.with_deadline(t)?, &s.with_deadline(t)?, &grid)?.into_solution()?;
                vec![t.into(), sol.value(0.0, x0)?.into(), entry_value(l)?.into()]
            }
        };
        table.push(row)?;
    }
    out.table("sweep", &table)?;
    out.finish(command, ctx.summary())
}
