//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meanrev::exit::Position;
use meanrev::model::Problem;
use meanrev::sim::Strategy;

#[derive(Debug, Parser)]
#[command(name = "meanrev", version, about = "Optimal entry and exit boundaries for mean-reverting prices with sequential deadlines")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; the reference parameters when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.directory`.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Long,
    Short,
}

impl From<Side> for Position {
    fn from(s: Side) -> Self {
        match s {
            Side::Long => Position::Long,
            Side::Short => Position::Short,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    LongShort,
    ShortLong,
    Chooser,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::LongShort => Strategy::LongShort,
            StrategyArg::ShortLong => Strategy::ShortLong,
            StrategyArg::Chooser => Strategy::Chooser,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    ExitLong,
    ExitShort,
    EntryLong,
    EntryShort,
    Chooser,
}

impl From<ProblemArg> for Problem {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::ExitLong => Problem::ExitLong,
            ProblemArg::ExitShort => Problem::ExitShort,
            ProblemArg::EntryLong => Problem::EntryLong,
            ProblemArg::EntryShort => Problem::EntryShort,
            ProblemArg::Chooser => Problem::Chooser,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exit boundary and value surface for an open position.
    SolveExit {
        #[arg(long, value_enum)]
        side: Side,
    },
    /// Entry boundary and value surface of the long-short or short-long strategy.
    SolveEntry {
        #[arg(long, value_enum)]
        side: Side,
    },
    /// Lower and upper entry boundaries of the chooser strategy.
    SolveChooser,
    /// Simulate round trips under the solved rules.
    Simulate {
        #[arg(long, value_enum, default_value = "long-short")]
        strategy: StrategyArg,
        /// Number of round trips; the first one's path is exported.
        #[arg(long, default_value_t = 1)]
        paths: usize,
        /// Defaults to `verification.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Start price; defaults to `verification.x0`, else θ.
        #[arg(long)]
        x0: Option<f64>,
        /// Defaults to `verification.steps_per_unit`.
        #[arg(long)]
        steps_per_unit: Option<usize>,
    },
    /// Compare the integral-equation values with the finite-difference and Monte Carlo oracles.
    Verify {
        /// Problems to check; all five when omitted.
        #[arg(long, value_enum, value_delimiter = ',')]
        problem: Vec<ProblemArg>,
    },
    /// `V(0, x0; T)` across entry deadlines.
    Sweep {
        #[arg(long, value_enum, default_value = "long-short")]
        strategy: StrategyArg,
        /// Comma-separated deadlines.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1.0")]
        deadline_sweep: Vec<f64>,
        /// Defaults to `verification.x0`, else θ.
        #[arg(long)]
        x0: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveExit { .. } => "solve-exit",
            Command::SolveEntry { .. } => "solve-entry",
            Command::SolveChooser => "solve-chooser",
            Command::Simulate { .. } => "simulate",
            Command::Verify { .. } => "verify",
            Command::Sweep { .. } => "sweep",
        }
    }
}
