//! Data files, the run manifest and the plotting stub.

use std::path::{Path, PathBuf};

use meanrev::config::RunConfig;
use meanrev::report::{Cell, Manifest, RunSummary, Table};
use meanrev::volterra::Boundary;

use crate::error::CliResult;

pub const MANIFEST: &str = "manifest.toml";
pub const PLOT_SCRIPT: &str = "plot.py";

/// Collects the files of one run under its output directory.
pub struct Output {
    pub dir: PathBuf,
    cfg: RunConfig,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: PathBuf, cfg: &RunConfig) -> CliResult<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            cfg: cfg.clone(),
            files: Vec::new(),
        })
    }

    /// Write `table` once per configured format as `<stem>.<ext>`.
    pub fn table(&mut self, stem: &str, table: &Table) -> CliResult<()> {
        for fmt in &self.cfg.output.formats {
            let name = format!("{stem}.{}", fmt.extension());
            table.write(&self.dir.join(&name), fmt.delimiter())?;
            self.files.push(name);
        }
        Ok(())
    }

    /// Manifest and plotting stub; returns the manifest path.
    pub fn finish(mut self, command: &str, mut summary: RunSummary) -> CliResult<PathBuf> {
        self.files.push(PLOT_SCRIPT.into());
        std::fs::write(self.dir.join(PLOT_SCRIPT), plot_script(&self.files))?;
        summary.files = self.files.clone();
        let manifest = Manifest {
            command: command.into(),
            summary,
            config: self.cfg.clone(),
        };
        let path = self.dir.join(MANIFEST);
        manifest.write(&path)?;
        Ok(path)
    }
}

/// `t, boundary_value` for one boundary, plus `upper_boundary` for a pair.
pub fn boundary_table(lower: &Boundary, upper: Option<&Boundary>) -> Table {
    let mut header = vec!["t", "boundary_value"];
    if upper.is_some() {
        header.push("upper_boundary");
    }
    let mut t = Table::new(&header);
    for (i, &v) in lower.values.iter().enumerate() {
        let mut row: Vec<Cell> = vec![lower.grid.t(i).into(), v.into()];
        if let Some(u) = upper {
            row.push(u.values[i].into());
        }
        t.push(row).expect("row matches header");
    }
    t
}

/// Plotting script for the written data files; needs pandas and matplotlib.
pub fn plot_script(files: &[String]) -> String {
    let list = files
        .iter()
        .filter(|f| f.ends_with(".csv") || f.ends_with(".tsv"))
        .map(|f| format!("    \"{f}\",\n"))
        .collect::<String>();
    format!(
        r#""""Plot the data files of this run. Needs pandas and matplotlib."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

HERE = Path(__file__).resolve().parent
FILES = [
{list}]


def plot(name):
    df = pd.read_csv(HERE / name, sep="\t" if name.endswith(".tsv") else ",")
    fig, ax = plt.subplots()
    cols = set(df.columns)
    if "boundary_value" in cols:
        for c in [c for c in df.columns if c != "t"]:
            ax.plot(df["t"], df[c], label=c)
        ax.set_xlabel("t")
    elif {{"t", "x", "value"}} <= cols:
        for t, g in df.groupby("t"):
            ax.plot(g["x"], g["value"], lw=0.8, label=f"t={{t:.3g}}")
        ax.set_xlabel("x")
    elif "T" in cols:
        for c in [c for c in df.columns if c != "T"]:
            ax.plot(df["T"], df[c], marker="o", label=c)
        ax.set_xlabel("deadline T")
    elif {{"t", "x"}} <= cols:
        ax.plot(df["t"], df["x"], lw=0.8)
        ax.set_xlabel("t")
    else:
        plt.close(fig)
        return
    ax.legend(fontsize="small")
    ax.set_title(name)
    fig.savefig(HERE / (Path(name).stem + ".png"), dpi=120)
    plt.close(fig)


if __name__ == "__main__":
    for f in FILES:
        plot(f)
"#
    )
}

/// Output directory: the override, else the config's.
pub fn resolve_dir(cfg: &RunConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.directory.clone())
}
