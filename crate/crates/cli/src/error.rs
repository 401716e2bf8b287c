//! Exit codes and the one-line error record printed on failure.

use std::fmt;

use meanrev::Error;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    /// I/O and anything not covered below.
    Other = 1,
    Config = 2,
    Solver = 3,
    Verification = 4,
}

impl ExitCode {
    pub fn label(&self) -> &'static str {
        match self {
            ExitCode::Success => "ok",
            ExitCode::Other => "io",
            ExitCode::Config => "config",
            ExitCode::Solver => "solver",
            ExitCode::Verification => "verification",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: ExitCode::Config,
            message: message.into(),
        }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        Self {
            code: ExitCode::Verification,
            message: message.into(),
        }
    }

    /// `meanrev-error code=<n> kind=<label> message="<text>"`, always one line.
    pub fn record(&self) -> String {
        let msg = self.message.replace('\\', "\\\\").replace('"', "\\\"").replace(['\n', '\r'], " ");
        format!("meanrev-error code={} kind={} message=\"{msg}\"", self.code as i32, self.code.label())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() {
            ExitCode::Solver
        } else {
            match e {
                Error::Config(_)
                | Error::InvalidParameter(_)
                | Error::Domain { .. }
                | Error::Argument(_)
                | Error::UnsupportedLaw(_)
                | Error::Degenerate { .. } => ExitCode::Config,
                _ => ExitCode::Other,
            }
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: ExitCode::Other,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
