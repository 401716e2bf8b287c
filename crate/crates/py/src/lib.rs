//! Python bindings: models, the three boundary solvers, the Monte Carlo
//! oracle and the round-trip simulator.
//!
//! Solver entry points return either a solution object or a `Degenerate`
//! record naming the trivial policy.

use meanrev::chooser::{solve_chooser as core_solve_chooser, ChooserSolution};
use meanrev::entry::{solve_entry_long, solve_entry_short, EntrySolution, ValueTable, TABLE_POINTS};
use meanrev::exit::{solve_exit_long, solve_exit_short, ExitSolution, Position};
use meanrev::model::{critical_levels as core_critical_levels, DegeneratePolicy, Family, MarketSpec, ModelSpec, Outcome, Regime};
use meanrev::oracles::mc::{mc_policy_value, Policy};
use meanrev::sim::{pnl_statistics, simulate_many, Monitoring, TradingRules};
use meanrev::volterra::{Boundary, SolverConfig, TimeGrid};
use meanrev::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(meanrev_py, SolverError, PyRuntimeError, "A boundary solve or numerical routine failed.");

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        SolverError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse_family(name: &str) -> PyResult<Family> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "ou" => Family::Ou,
        "cir" => Family::Cir,
        "igbm" => Family::Igbm,
        "jacobi" => Family::Jacobi,
        other => return Err(PyValueError::new_err(format!("unknown family {other:?}; use ou, cir, igbm or jacobi"))),
    })
}

fn parse_side(side: &str) -> PyResult<Position> {
    match side {
        "long" => Ok(Position::Long),
        "short" => Ok(Position::Short),
        other => Err(PyValueError::new_err(format!("side must be \"long\" or \"short\", got {other:?}"))),
    }
}

fn parse_monitoring(name: &str) -> PyResult<Monitoring> {
    match name {
        "discrete" => Ok(Monitoring::Discrete),
        "brownian-bridge" => Ok(Monitoring::BrownianBridge),
        other => Err(PyValueError::new_err(format!("monitoring must be \"discrete\" or \"brownian-bridge\", got {other:?}"))),
    }
}

fn side_name(p: Position) -> &'static str {
    match p {
        Position::Long => "long",
        Position::Short => "short",
    }
}

/// A mean-reverting diffusion `dX = μ(θ − X)dt + σ(X)dW`.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: ModelSpec,
}

#[pymethods]
impl PyModel {
    /// `family` is one of `ou`, `cir`, `igbm`, `jacobi`; the Jacobi family
    /// also needs `lower` and `upper`.
    #[new]
    #[pyo3(signature = (family, mu, theta, sigma, lower=None, upper=None))]
    fn new(family: &str, mu: f64, theta: f64, sigma: f64, lower: Option<f64>, upper: Option<f64>) -> PyResult<Self> {
        let bounds = match (lower, upper) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(PyValueError::new_err("lower and upper must be given together")),
        };
        let inner = ModelSpec::new(parse_family(family)?, mu, theta, sigma, bounds).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn ou(mu: f64, theta: f64, sigma: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ModelSpec::ou(mu, theta, sigma).map_err(to_py)?,
        })
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn state_space(&self) -> (f64, f64) {
        (self.inner.state_space.lower, self.inner.state_space.upper)
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!("Model({:?}, mu={}, theta={}, sigma={})", m.family, m.mu, m.theta, m.sigma)
    }
}

/// Rate `r`, cost `c`, entry deadline `T` and exit window `T'`.
#[pyclass(name = "Market", frozen)]
struct PyMarket {
    inner: MarketSpec,
}

#[pymethods]
impl PyMarket {
    #[new]
    fn new(r: f64, c: f64, deadline: f64, window: f64) -> PyResult<Self> {
        Ok(Self {
            inner: MarketSpec::new(r, c, deadline, window).map_err(to_py)?,
        })
    }

    #[getter]
    fn r(&self) -> f64 {
        self.inner.r
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter]
    fn deadline(&self) -> f64 {
        self.inner.deadline
    }

    #[getter]
    fn window(&self) -> f64 {
        self.inner.window
    }

    fn __repr__(&self) -> String {
        let k = &self.inner;
        format!("Market(r={}, c={}, deadline={}, window={})", k.r, k.c, k.deadline, k.window)
    }
}

/// A trivial stopping problem: the solver was not run.
#[pyclass(name = "Degenerate", frozen)]
struct PyDegenerate {
    #[pyo3(get)]
    problem: String,
    #[pyo3(get)]
    regime: String,
}

impl From<DegeneratePolicy> for PyDegenerate {
    fn from(p: DegeneratePolicy) -> Self {
        let regime = match p.regime {
            Regime::NonDegenerate => "non-degenerate",
            Regime::StopImmediately => "stop-immediately",
            Regime::WaitUntilDeadline => "wait-until-deadline",
        };
        Self {
            problem: p.problem.name().into(),
            regime: regime.into(),
        }
    }
}

#[pymethods]
impl PyDegenerate {
    fn __repr__(&self) -> String {
        format!("Degenerate(problem={:?}, regime={:?})", self.problem, self.regime)
    }
}

fn times(b: &Boundary) -> Vec<f64> {
    b.grid.nodes()
}

/// Optimal exit boundary and value function of an open position.
#[pyclass(name = "ExitSolution", frozen)]
struct PyExit {
    inner: ExitSolution,
}

#[pymethods]
impl PyExit {
    #[getter]
    fn side(&self) -> &'static str {
        side_name(self.inner.position())
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        times(&self.inner.boundary)
    }

    #[getter]
    fn boundary(&self) -> Vec<f64> {
        self.inner.boundary.values.clone()
    }

    fn boundary_at(&self, t: f64) -> f64 {
        self.inner.boundary.at(t)
    }

    fn value(&self, t: f64, x: f64) -> PyResult<f64> {
        self.inner.value(t, x).map_err(to_py)
    }
}

/// Entry boundary of the long-short or short-long strategy.
#[pyclass(name = "EntrySolution", frozen)]
struct PyEntry {
    inner: EntrySolution,
}

#[pymethods]
impl PyEntry {
    #[getter]
    fn side(&self) -> &'static str {
        side_name(self.inner.position())
    }

    /// Root of the entry payoff.
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        times(&self.inner.boundary)
    }

    #[getter]
    fn boundary(&self) -> Vec<f64> {
        self.inner.boundary.values.clone()
    }

    #[getter]
    fn exit_boundary(&self) -> Vec<f64> {
        self.inner.exit().boundary.values.clone()
    }

    fn value(&self, t: f64, x: f64) -> PyResult<f64> {
        self.inner.value(t, x).map_err(to_py)
    }
}

/// Lower (long) and upper (short) entry boundaries of the chooser strategy.
#[pyclass(name = "ChooserSolution", frozen)]
struct PyChooser {
    inner: ChooserSolution,
}

#[pymethods]
impl PyChooser {
    #[getter]
    fn times(&self) -> Vec<f64> {
        times(&self.inner.lower)
    }

    #[getter]
    fn lower(&self) -> Vec<f64> {
        self.inner.lower.values.clone()
    }

    #[getter]
    fn upper(&self) -> Vec<f64> {
        self.inner.upper.values.clone()
    }

    /// `(gamma_long, gamma_short, m)`.
    #[getter]
    fn thresholds(&self) -> (f64, f64, f64) {
        let th = self.inner.thresholds();
        (th.gamma_long, th.gamma_short, th.m)
    }

    #[getter]
    fn case(&self) -> String {
        format!("{:?}", self.inner.case()).to_lowercase()
    }

    /// `"long"`, `"short"` or `None` (keep waiting) at `(t, x)`.
    fn entry_side(&self, t: f64, x: f64) -> Option<&'static str> {
        self.inner.entry_side(t, x).map(side_name)
    }

    fn value(&self, t: f64, x: f64) -> PyResult<f64> {
        self.inner.value(t, x).map_err(to_py)
    }
}

/// `(x*, x_*)`: the exit-long and exit-short terminal boundary values.
#[pyfunction]
fn critical_levels(model: &PyModel, market: &PyMarket) -> (f64, f64) {
    let lv = core_critical_levels(&model.inner, &market.inner);
    (lv.upper, lv.lower)
}

fn exit_outcome(model: &ModelSpec, market: &MarketSpec, side: Position, n_steps: usize) -> PyResult<Outcome<ExitSolution>> {
    let grid = TimeGrid::new(market.window, n_steps).map_err(to_py)?;
    let cfg = SolverConfig::default();
    match side {
        Position::Long => solve_exit_long(model, market, &grid, &cfg),
        Position::Short => solve_exit_short(model, market, &grid, &cfg),
    }
    .map_err(to_py)
}

fn value_table(model: &ModelSpec, market: &MarketSpec, side: Position, n_steps: usize) -> PyResult<ValueTable> {
    let exit = exit_outcome(model, market, side, n_steps)?.into_solution().map_err(to_py)?;
    ValueTable::new(&exit, TABLE_POINTS).map_err(to_py)
}

fn wrap<T, P: pyo3::PyClass + Into<pyo3::PyClassInitializer<P>>>(py: Python<'_>, out: Outcome<T>, f: impl FnOnce(T) -> P) -> PyResult<Py<PyAny>> {
    match out {
        Outcome::Solved(s) => Ok(Py::new(py, f(s))?.into_any()),
        Outcome::Degenerate(p) => Ok(Py::new(py, PyDegenerate::from(p))?.into_any()),
    }
}

/// Exit boundary for `side` (`"long"` or `"short"`) on an `n_steps` grid
/// over the exit window.
#[pyfunction]
#[pyo3(signature = (model, market, side, n_steps=500))]
fn solve_exit(py: Python<'_>, model: &PyModel, market: &PyMarket, side: &str, n_steps: usize) -> PyResult<Py<PyAny>> {
    let out = exit_outcome(&model.inner, &market.inner, parse_side(side)?, n_steps)?;
    wrap(py, out, |inner| PyExit { inner })
}

/// Entry boundary of the strategy that opens with `side`.
#[pyfunction]
#[pyo3(signature = (model, market, side, n_steps=500))]
fn solve_entry(py: Python<'_>, model: &PyModel, market: &PyMarket, side: &str, n_steps: usize) -> PyResult<Py<PyAny>> {
    let side = parse_side(side)?;
    let table = value_table(&model.inner, &market.inner, side, n_steps)?;
    let grid = TimeGrid::new(market.inner.deadline, n_steps).map_err(to_py)?;
    let cfg = SolverConfig::default();
    let out = match side {
        Position::Long => solve_entry_long(&table, &grid, &cfg),
        Position::Short => solve_entry_short(&table, &grid, &cfg),
    }
    .map_err(to_py)?;
    wrap(py, out, |inner| PyEntry { inner })
}

/// Chooser boundaries: enter long below the lower one, short above the upper one.
#[pyfunction]
#[pyo3(signature = (model, market, n_steps=500))]
fn solve_chooser(py: Python<'_>, model: &PyModel, market: &PyMarket, n_steps: usize) -> PyResult<Py<PyAny>> {
    let long = value_table(&model.inner, &market.inner, Position::Long, n_steps)?;
    let short = value_table(&model.inner, &market.inner, Position::Short, n_steps)?;
    let grid = TimeGrid::new(market.inner.deadline, n_steps).map_err(to_py)?;
    let out = core_solve_chooser(&long, &short, &grid, &SolverConfig::default()).map_err(to_py)?;
    wrap(py, out, |inner| PyChooser { inner })
}

fn policy_of(solution: &Bound<'_, PyAny>) -> PyResult<(Policy, ModelSpec)> {
    if let Ok(s) = solution.extract::<PyRef<'_, PyExit>>() {
        return Ok((Policy::from_exit(&s.inner), *s.inner.model()));
    }
    if let Ok(s) = solution.extract::<PyRef<'_, PyEntry>>() {
        return Ok((Policy::from_entry(&s.inner), *s.inner.exit().model()));
    }
    if let Ok(s) = solution.extract::<PyRef<'_, PyChooser>>() {
        return Ok((Policy::from_chooser(&s.inner), s.inner.equation.model));
    }
    Err(PyTypeError::new_err("expected an ExitSolution, EntrySolution or ChooserSolution"))
}

/// Monte Carlo value `(mean, standard_error)` of a solved policy started at `x0`.
#[pyfunction]
#[pyo3(signature = (solution, x0, n_paths=100_000, steps_per_unit=2000, seed=0, monitoring="brownian-bridge"))]
fn mc_value(solution: &Bound<'_, PyAny>, x0: f64, n_paths: usize, steps_per_unit: usize, seed: u64, monitoring: &str) -> PyResult<(f64, f64)> {
    let (policy, model) = policy_of(solution)?;
    let est = mc_policy_value(&policy, &model, x0, n_paths, steps_per_unit, seed, parse_monitoring(monitoring)?).map_err(to_py)?;
    Ok((est.mean, est.se))
}

/// Simulate `n` round trips of an entry or chooser solution; returns the
/// P&L summary as a dict.
#[pyfunction]
#[pyo3(signature = (solution, x0, n=1000, steps_per_unit=2000, seed=0))]
fn simulate<'py>(py: Python<'py>, solution: &Bound<'py, PyAny>, x0: f64, n: usize, steps_per_unit: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let (rules, model) = if let Ok(s) = solution.extract::<PyRef<'_, PyEntry>>() {
        (TradingRules::from_entry(&s.inner), *s.inner.exit().model())
    } else if let Ok(s) = solution.extract::<PyRef<'_, PyChooser>>() {
        (TradingRules::from_chooser(&s.inner), s.inner.equation.model)
    } else {
        return Err(PyTypeError::new_err("expected an EntrySolution or ChooserSolution"));
    };
    let records = simulate_many(&model, &rules, x0, steps_per_unit, n, seed).map_err(to_py)?;
    let s = pnl_statistics(&records).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("count", s.count)?;
    d.set_item("mean", s.mean)?;
    d.set_item("se", s.se)?;
    d.set_item("entry_frequency", s.entry_frequency)?;
    d.set_item("forced_exit_frequency", s.forced_exit_frequency)?;
    d.set_item("mean_holding_time", s.mean_holding_time)?;
    Ok(d)
}

#[pymodule]
fn meanrev_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyMarket>()?;
    m.add_class::<PyDegenerate>()?;
    m.add_class::<PyExit>()?;
    m.add_class::<PyEntry>()?;
    m.add_class::<PyChooser>()?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_function(wrap_pyfunction!(critical_levels, m)?)?;
    m.add_function(wrap_pyfunction!(solve_exit, m)?)?;
    m.add_function(wrap_pyfunction!(solve_entry, m)?)?;
    m.add_function(wrap_pyfunction!(solve_chooser, m)?)?;
    m.add_function(wrap_pyfunction!(mc_value, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
