//! Delimited tables with 12 significant digits, and the TOML run manifest.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::sim::PnlSummary;

/// Significant digits of every number written to a table.
pub const SIG_DIGITS: usize = 12;

/// Format `x` with [`SIG_DIGITS`] significant digits: positional notation
/// for magnitudes in `[1e-5, 1e15)`, scientific otherwise.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // round first so that 9.999…e2 moves to the next decade before choosing decimals
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(if b { "true" } else { "false" }.into())
    }
}

/// Rows under a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Argument(format!(
                "row has {} cells for {} columns",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn render(&self, delimiter: char) -> String {
        let mut out = String::new();
        let sep = delimiter.to_string();
        out.push_str(&self.header.join(&sep));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => fmt_sig(*x),
                    Cell::Text(s) => s.clone(),
                    Cell::Empty => String::new(),
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(&sep));
        }
        out
    }

    pub fn write(&self, path: &Path, delimiter: char) -> Result<()> {
        std::fs::write(path, self.render(delimiter))?;
        Ok(())
    }
}

/// Headline numbers of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    /// Degenerate regime when no boundary was solved.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_max: Option<f64>,
    pub terminal_values: Vec<f64>,
    pub x_star: f64,
    pub x_lower_star: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_long: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_short: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Simulated round trips.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pnl: Option<PnlSummary>,
    /// Outcome of `verify`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification_passed: Option<bool>,
    pub files: Vec<String>,
}

/// Config echo plus results, written next to the data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub summary: RunSummary,
    pub config: RunConfig,
}

impl Manifest {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))?;
        m.config.validate()?;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt_sig(1.0), "1.00000000000");
        assert_eq!(fmt_sig(0.539669421487603), "0.539669421488");
        assert_eq!(fmt_sig(-12.5), "-12.5000000000");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1e-7), "1.00000000000e-7");
        assert_eq!(fmt_sig(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_sig(9.9999999999999e2), "1000.00000000");
    }

    proptest! {
        #[test]
        fn twelve_significant_digits_survive(x in -1e6f64..1e6) {
            let back: f64 = fmt_sig(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn table_rendering() {
        let mut t = Table::new(&["t", "side", "x"]);
        t.push(vec![0.5.into(), "long".into(), Cell::Empty]).unwrap();
        assert!(t.push(vec![1.0.into()]).is_err());
        assert_eq!(t.render(','), "t,side,x\n0.500000000000,long,\n");
    }

    #[test]
    fn manifest_round_trip_preserves_config() {
        let m = Manifest {
            command: "solve-exit".into(),
            summary: RunSummary {
                problem: Some("exit-long".into()),
                terminal_values: vec![0.539669421487603],
                x_star: 0.539669421487603,
                x_lower_star: 0.539656,
                gamma_long: Some(f64::INFINITY),
                ..RunSummary::default()
            },
            config: RunConfig::default(),
        };
        let back = Manifest::from_toml_str(&m.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
