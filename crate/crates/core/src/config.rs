//! Run configuration: a TOML file with `[model]`, `[market]`, `[solver]`,
//! `[output]` and `[verification]` sections. Unknown keys are rejected and
//! every number is checked against the model, market and solver invariants
//! at load time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Family, MarketSpec, ModelSpec};
use crate::oracles::fd::{FdConfig, FdGrid, FdScheme, DEFAULT_WIDTH_SD};
use crate::sim::Monitoring;
use crate::volterra::{SolverConfig, TimeGrid, TimeQuadrature};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: Family,
    pub mu: f64,
    pub theta: f64,
    pub sigma: f64,
    /// Jacobi bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub r: f64,
    pub c: f64,
    /// Entry deadline.
    #[serde(rename = "T")]
    pub deadline: f64,
    /// Exit window.
    #[serde(rename = "T_prime")]
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Time steps of the boundary grids.
    pub n_steps: usize,
    pub fixed_point_tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub monotone_tol: f64,
    /// Overrides the per-problem time rule.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<TimeQuadrature>,
    /// Points of the tabulated exit values feeding the entry problems.
    pub table_points: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            n_steps: 500,
            fixed_point_tol: s.fixed_point_tol,
            max_iters: s.max_iters,
            damping: s.damping,
            monotone_tol: s.monotone_tol,
            quadrature: None,
            table_points: crate::entry::TABLE_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Tsv,
}

impl OutputFormat {
    pub fn delimiter(&self) -> char {
        match self {
            OutputFormat::Csv => ',',
            OutputFormat::Tsv => '\t',
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Tsv => "tsv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
    /// Value-surface resolution: time rows and price columns over `θ ± value_width_sd`.
    pub value_nt: usize,
    pub value_nx: usize,
    pub value_width_sd: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv],
            value_nt: 10,
            value_nx: 41,
            value_width_sd: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerificationSection {
    pub fd: bool,
    pub mc: bool,
    pub perturbation: bool,
    pub n_paths: usize,
    pub seed: u64,
    pub steps_per_unit: usize,
    pub fd_nx: usize,
    pub fd_nt: usize,
    pub fd_scheme: FdScheme,
    /// Boundary shift of the perturbation check.
    pub shift: f64,
    /// Crossing detection of the Monte Carlo checks.
    pub monitoring: Monitoring,
    /// Start price of the MC checks; `θ` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
}

impl Default for VerificationSection {
    fn default() -> Self {
        Self {
            fd: true,
            mc: true,
            perturbation: true,
            n_paths: 1_000_000,
            seed: 20_240_601,
            steps_per_unit: crate::oracles::mc::DEFAULT_STEPS_PER_UNIT,
            fd_nx: 2000,
            fd_nt: 2000,
            fd_scheme: FdScheme::CrankNicolson,
            shift: 0.02,
            monitoring: Monitoring::BrownianBridge,
            x0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub market: MarketSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verification: VerificationSection,
}

impl Default for RunConfig {
    /// the reference parameters: OU with μ = 16, θ = 0.54, σ = 0.16 and
    /// r = c = 0.01, T = T′ = 1.
    fn default() -> Self {
        Self {
            model: ModelSection {
                family: Family::Ou,
                mu: 16.0,
                theta: 0.54,
                sigma: 0.16,
                lower: None,
                upper: None,
            },
            market: MarketSection {
                r: 0.01,
                c: 0.01,
                deadline: 1.0,
                window: 1.0,
            },
            solver: SolverSection::default(),
            output: OutputSection::default(),
            verification: VerificationSection::default(),
        }
    }
}

impl RunConfig {
    /// Parse and validate.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model_spec()?;
        self.market_spec()?;
        self.solver_config().validate()?;
        let s = &self.solver;
        if s.n_steps < 2 {
            return Err(Error::Config(format!("solver.n_steps must be >= 2, got {}", s.n_steps)));
        }
        if s.table_points < 4 {
            return Err(Error::Config(format!("solver.table_points must be >= 4, got {}", s.table_points)));
        }
        if !(s.monotone_tol >= 0.0) {
            return Err(Error::Config("solver.monotone_tol must be >= 0".into()));
        }
        let o = &self.output;
        if o.formats.is_empty() {
            return Err(Error::Config("output.formats must list at least one format".into()));
        }
        if o.value_nt == 0 || o.value_nx < 2 || !(o.value_width_sd > 0.0) {
            return Err(Error::Config("output value grid needs value_nt >= 1, value_nx >= 2, value_width_sd > 0".into()));
        }
        let v = &self.verification;
        if v.n_paths < crate::oracles::mc::MIN_PATHS {
            return Err(Error::Config(format!(
                "verification.n_paths must be >= {}, got {}",
                crate::oracles::mc::MIN_PATHS,
                v.n_paths
            )));
        }
        if v.steps_per_unit < 100 {
            return Err(Error::Config("verification.steps_per_unit must be >= 100".into()));
        }
        FdGrid::new(0.0, 1.0, v.fd_nx, v.fd_nt, v.fd_scheme).map_err(|e| Error::Config(e.to_string()))?;
        if !v.shift.is_finite() {
            return Err(Error::Config("verification.shift must be finite".into()));
        }
        if let Some(x0) = v.x0 {
            self.model_spec()?.check_state(x0)?;
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let bounds = match (m.lower, m.upper) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(Error::Config("model.lower and model.upper must be given together".into())),
        };
        if bounds.is_some() && m.family != Family::Jacobi {
            return Err(Error::Config("model.lower/upper only apply to the jacobi family".into()));
        }
        ModelSpec::new(m.family, m.mu, m.theta, m.sigma, bounds)
    }

    pub fn market_spec(&self) -> Result<MarketSpec> {
        let k = &self.market;
        MarketSpec::new(k.r, k.c, k.deadline, k.window)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            quadrature: s.quadrature,
            fixed_point_tol: s.fixed_point_tol,
            max_iters: s.max_iters,
            damping: s.damping,
            monotone_tol: s.monotone_tol,
            ..SolverConfig::default()
        }
    }

    pub fn exit_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.market.window, self.solver.n_steps)
    }

    pub fn entry_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.market.deadline, self.solver.n_steps)
    }

    pub fn fd_grid(&self) -> Result<FdGrid> {
        let v = &self.verification;
        FdGrid::around_mean(&self.model_spec()?, DEFAULT_WIDTH_SD, v.fd_nx, v.fd_nt, v.fd_scheme)
    }

    pub fn fd_config(&self) -> FdConfig {
        FdConfig::default()
    }

    pub fn x0(&self) -> f64 {
        self.verification.x0.unwrap_or(self.model.theta)
    }
}
