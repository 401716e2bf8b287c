//! Command-line front end: loads a run configuration, drives the solvers and
//! oracles, and writes data files, a manifest and a plotting stub.

pub mod args;
mod commands;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use meanrev::config::RunConfig;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult, ExitCode};

/// The config at `path`, or the default one.
pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => RunConfig::load(p).map_err(|e| CliError::config(format!("{}: {e}", p.display()))),
    }
}

/// Run one command; returns the manifest path.
///
/// A failed verification still writes its report and manifest before
/// returning the error.
pub fn run(cli: &Cli) -> CliResult<PathBuf> {
    let cfg = load_config(cli.common.config.as_deref())?;
    commands::dispatch(&cli.command, &cfg, cli.common.out.as_deref())
}
