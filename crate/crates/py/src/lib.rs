//! Python bindings. Parameters come in as a dict or TOML text with the same
//! layout as the `[economy]` table of a run configuration; reports come back
//! as plain Python objects (through JSON, so non-finite floats become None).

use std::fs::File;
use std::io::{BufReader, BufWriter};

use fiscal_default::io::{read_bundle, write_bundle, Bundle};
use fiscal_default::sim::{self, EpisodeSpec, MomentSettings, SimSettings};
use fiscal_default::{DebtLimits, Economy, EconomyParams};
use pyo3::exceptions::{PyRuntimeError, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::Serialize;

fn err(e: fiscal_default::Error) -> PyErr {
    match e {
        fiscal_default::Error::InvalidParameter { .. }
        | fiscal_default::Error::OutsideGrid { .. } => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn py_json(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    obj.py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()
}

/// Parameters and derived objects (spending chain, offers, debt grid).
#[pyclass(name = "Economy", module = "fiscal_default", frozen)]
struct PyEconomy {
    inner: Economy,
}

#[pymethods]
impl PyEconomy {
    /// `params` is a dict or TOML text; omitted keys take their defaults.
    #[new]
    #[pyo3(signature = (params = None))]
    fn new(params: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let p: EconomyParams = match params {
            None => EconomyParams::default(),
            Some(obj) if obj.is_instance_of::<PyString>() => {
                let text: String = obj.extract()?;
                toml::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?
            }
            Some(obj) => {
                let text: String = py_json(obj)?;
                serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?
            }
        };
        Ok(Self {
            inner: p.build().map_err(err)?,
        })
    }

    /// Resolved parameters as a dict.
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.params)
    }

    #[getter]
    fn g_values(&self) -> Vec<f64> {
        self.inner.chain.g_values.clone()
    }

    /// Transition matrix, row-major nested lists.
    #[getter]
    fn transition(&self) -> Vec<Vec<f64>> {
        (0..self.inner.n_g())
            .map(|g| self.inner.chain.row(g).to_vec())
            .collect()
    }

    #[getter]
    fn stationary(&self) -> Vec<f64> {
        self.inner.chain.stationary.clone()
    }

    #[getter]
    fn b_values(&self) -> Vec<f64> {
        self.inner.grid.b_values.clone()
    }

    #[getter]
    fn deltas(&self) -> Vec<f64> {
        self.inner.offers.deltas.clone()
    }

    #[getter]
    fn offer_probability(&self) -> f64 {
        self.inner.offers.lambda
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    /// Peak of the Laffer curve at productivity `kappa`.
    fn max_revenue(&self, kappa: f64) -> f64 {
        self.inner.model.max_revenue(kappa)
    }

    fn surplus(&self, kappa: f64, n: f64, g: f64) -> PyResult<f64> {
        self.inner.model.surplus(kappa, n, g).map_err(err)
    }

    fn labor_from_revenue(&self, kappa: f64, revenue: f64) -> PyResult<f64> {
        self.inner
            .model
            .labor_from_revenue(kappa, revenue)
            .map_err(err)
    }

    fn tax_rate(&self, kappa: f64, n: f64) -> f64 {
        self.inner.model.tax_rate(kappa, n)
    }

    fn multiplier(&self, n: f64) -> PyResult<f64> {
        self.inner.model.multiplier(n).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Economy(n_g={}, n_b={}, n_offers={}, lambda={})",
            self.inner.n_g(),
            self.inner.n_b(),
            self.inner.offers.len(),
            self.inner.offers.lambda
        )
    }
}

/// Solution of the economy with default. Tables are flat lists indexed by
/// `g * n_b + b`.
#[pyclass(name = "EdSolution", module = "fiscal_default", frozen)]
struct PyEdSolution {
    inner: fiscal_default::EdSolution,
}

#[pymethods]
impl PyEdSolution {
    #[getter]
    fn n_g(&self) -> usize {
        self.inner.n_g()
    }

    #[getter]
    fn n_b(&self) -> usize {
        self.inner.n_b()
    }

    #[getter]
    fn v_repay(&self) -> Vec<f64> {
        self.inner.v_repay.clone()
    }

    #[getter]
    fn v_autarky(&self) -> Vec<f64> {
        self.inner.v_autarky.clone()
    }

    #[getter]
    fn price_repay(&self) -> Vec<f64> {
        self.inner.price_repay.clone()
    }

    #[getter]
    fn price_autarky(&self) -> Vec<f64> {
        self.inner.price_autarky.clone()
    }

    #[getter]
    fn policy_debt(&self) -> Vec<Option<usize>> {
        self.inner.policy_debt.clone()
    }

    #[getter]
    fn default(&self) -> Vec<bool> {
        self.inner.default.clone()
    }

    /// Per debt level, the lowest spending level at which the government
    /// defaults (`inf` if never).
    #[getter]
    fn default_threshold(&self) -> Vec<f64> {
        self.inner.thresholds.default_g.clone()
    }

    #[getter]
    fn threshold_violations(&self) -> usize {
        self.inner.thresholds.violations.len()
    }

    #[getter]
    fn price_residuals(&self) -> Vec<f64> {
        self.inner.convergence.price_residuals.clone()
    }

    fn accepts(&self, g: usize, offer: usize, b: usize) -> PyResult<bool> {
        if g >= self.inner.n_g() || b >= self.inner.n_b() || offer >= self.inner.n_offers() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.accept_at(g, offer, b))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save(path, &Bundle::Ed(self.inner.clone()))
    }

    fn __repr__(&self) -> String {
        format!(
            "EdSolution(n_g={}, n_b={}, outer_iterations={})",
            self.inner.n_g(),
            self.inner.n_b(),
            self.inner.convergence.outer_iterations
        )
    }
}

/// Solution of the risk-free benchmark.
#[pyclass(name = "AmssSolution", module = "fiscal_default", frozen)]
struct PyAmssSolution {
    inner: fiscal_default::AmssSolution,
}

#[pymethods]
impl PyAmssSolution {
    #[getter]
    fn value(&self) -> Vec<f64> {
        self.inner.value.clone()
    }

    #[getter]
    fn policy_debt(&self) -> Vec<Option<usize>> {
        self.inner.policy_debt.clone()
    }

    #[getter]
    fn policy_revenue(&self) -> Vec<f64> {
        self.inner.policy_revenue.clone()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save(path, &Bundle::Amss(self.inner.clone()))
    }

    fn __repr__(&self) -> String {
        format!(
            "AmssSolution(n_b={}, limits=({}, {}))",
            self.inner.n_b(),
            self.inner.limits.min,
            self.inner.limits.max
        )
    }
}

fn save(path: &str, b: &Bundle) -> PyResult<()> {
    let f = File::create(path).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    write_bundle(b, BufWriter::new(f)).map_err(err)
}

/// Loads a solution bundle written by `save` or the command-line tool.
#[pyfunction]
fn load(py: Python<'_>, path: &str) -> PyResult<Py<PyAny>> {
    let f = File::open(path).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(match read_bundle(BufReader::new(f)).map_err(err)? {
        Bundle::Ed(inner) => Py::new(py, PyEdSolution { inner })?.into_any(),
        Bundle::Amss(inner) => Py::new(py, PyAmssSolution { inner })?.into_any(),
    })
}

#[pyfunction]
fn solve(py: Python<'_>, economy: &PyEconomy) -> PyResult<PyEdSolution> {
    let econ = &economy.inner;
    let inner = py.detach(|| fiscal_default::solve(econ)).map_err(err)?;
    Ok(PyEdSolution { inner })
}

/// Risk-free benchmark with debt confined to `[min, max]` (default: the grid).
#[pyfunction]
#[pyo3(signature = (economy, min = 0.0, max = None))]
fn solve_amss(
    py: Python<'_>,
    economy: &PyEconomy,
    min: f64,
    max: Option<f64>,
) -> PyResult<PyAmssSolution> {
    let econ = &economy.inner;
    let limits = DebtLimits {
        min,
        max: max.unwrap_or_else(|| econ.grid.max()),
    };
    let inner = py
        .detach(|| fiscal_default::solve_amss(econ, limits))
        .map_err(err)?;
    Ok(PyAmssSolution { inner })
}

/// One simulated trajectory.
#[pyclass(name = "SimPath", module = "fiscal_default", frozen)]
struct PySimPath {
    inner: sim::SimPath,
}

#[pymethods]
impl PySimPath {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn burn_in(&self) -> usize {
        self.inner.burn_in
    }

    #[getter]
    fn g(&self) -> Vec<f64> {
        self.inner.g.clone()
    }

    #[getter]
    fn access(&self) -> Vec<bool> {
        self.inner.access.clone()
    }

    #[getter]
    fn default(&self) -> Vec<bool> {
        self.inner.default.clone()
    }

    #[getter]
    fn debt(&self) -> Vec<f64> {
        self.inner.debt.clone()
    }

    #[getter]
    fn debt_next(&self) -> Vec<f64> {
        self.inner.debt_next.clone()
    }

    #[getter]
    fn tax(&self) -> Vec<f64> {
        self.inner.tax.clone()
    }

    #[getter]
    fn spread(&self) -> Vec<f64> {
        self.inner.spread.clone()
    }

    #[getter]
    fn multiplier(&self) -> Vec<f64> {
        self.inner.multiplier.clone()
    }

    /// Every recorded series as a dict of lists.
    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }
}

/// Simulates either economy, depending on the solution type.
#[pyfunction]
#[pyo3(signature = (economy, solution, seed, horizon = 2500, burn_in = 500))]
fn simulate(
    py: Python<'_>,
    economy: &PyEconomy,
    solution: &Bound<'_, PyAny>,
    seed: u64,
    horizon: usize,
    burn_in: usize,
) -> PyResult<PySimPath> {
    let econ = &economy.inner;
    let settings = SimSettings { horizon, burn_in };
    let path = if let Ok(s) = solution.cast::<PyEdSolution>() {
        let sol = &s.get().inner;
        py.detach(|| sim::simulate(econ, sol, settings, seed))
    } else if let Ok(s) = solution.cast::<PyAmssSolution>() {
        let sol = &s.get().inner;
        py.detach(|| sim::simulate_amss(econ, sol, settings, seed))
    } else {
        return Err(PyTypeError::new_err(
            "expected an EdSolution or AmssSolution",
        ));
    }
    .map_err(err)?;
    Ok(PySimPath { inner: path })
}

/// Checks a simulated path against the period budget; returns the list of
/// violations, empty when the path is implementable.
#[pyfunction]
#[pyo3(signature = (economy, solution, path, tol = 1e-9))]
fn validate_path<'py>(
    py: Python<'py>,
    economy: &PyEconomy,
    solution: &Bound<'py, PyAny>,
    path: &PySimPath,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let p = &path.inner;
    let econ = &economy.inner;
    let report = if let Ok(s) = solution.cast::<PyEdSolution>() {
        sim::validate_implementability(p, econ, &s.get().inner, tol)
    } else if solution.cast::<PyAmssSolution>().is_ok() {
        sim::validate_amss_path(p, econ, tol)
    } else {
        return Err(PyTypeError::new_err(
            "expected an EdSolution or AmssSolution",
        ));
    };
    to_py(py, &report.violations)
}

/// Monte Carlo moments of both economies on shared spending paths.
#[pyfunction]
#[pyo3(signature = (economy, ed, amss, seed, replications = 500, horizon = 2500, burn_in = 500, spread_cutoff = 0.5, bins = 60))]
#[allow(clippy::too_many_arguments)]
fn moments<'py>(
    py: Python<'py>,
    economy: &PyEconomy,
    ed: &PyEdSolution,
    amss: &PyAmssSolution,
    seed: u64,
    replications: usize,
    horizon: usize,
    burn_in: usize,
    spread_cutoff: f64,
    bins: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let settings = MomentSettings {
        replications,
        sim: SimSettings { horizon, burn_in },
        spread_cutoff,
        bins,
    };
    let (econ, e, a) = (&economy.inner, &ed.inner, &amss.inner);
    let report = py
        .detach(|| sim::mc_moments(econ, e, a, &settings, seed))
        .map_err(err)?;
    to_py(py, &report)
}

/// Re-solves for each offer probability and returns one row per value.
#[pyfunction]
#[pyo3(signature = (economy, lambdas, seed, replications = 500, horizon = 2500, burn_in = 500))]
fn renegotiation_table<'py>(
    py: Python<'py>,
    economy: &PyEconomy,
    lambdas: Vec<f64>,
    seed: u64,
    replications: usize,
    horizon: usize,
    burn_in: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let params = &economy.inner.params;
    let settings = SimSettings { horizon, burn_in };
    let rows = py
        .detach(|| sim::renegotiation_table(params, &lambdas, replications, settings, seed))
        .map_err(err)?;
    to_py(py, &rows)
}

#[pyfunction]
fn impulse_response<'py>(
    py: Python<'py>,
    economy: &PyEconomy,
    ed: &PyEdSolution,
    amss: &PyAmssSolution,
    g_path: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let panel =
        sim::impulse_response(&economy.inner, &ed.inner, &amss.inner, &g_path).map_err(err)?;
    to_py(py, &panel)
}

/// Default-episode windows with the no-default counterfactual.
#[pyfunction]
#[pyo3(signature = (economy, ed, amss, seed, replications = 500, horizon = 2500, burn_in = 500, max_episodes = 1000))]
#[allow(clippy::too_many_arguments)]
fn episodes<'py>(
    py: Python<'py>,
    economy: &PyEconomy,
    ed: &PyEdSolution,
    amss: &PyAmssSolution,
    seed: u64,
    replications: usize,
    horizon: usize,
    burn_in: usize,
    max_episodes: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let settings = MomentSettings {
        replications,
        sim: SimSettings { horizon, burn_in },
        ..MomentSettings::default()
    };
    let spec = EpisodeSpec {
        max_episodes,
        ..EpisodeSpec::default()
    };
    let (econ, e, a) = (&economy.inner, &ed.inner, &amss.inner);
    let panel = py
        .detach(|| sim::collect_episodes(econ, e, a, &settings, &spec, seed))
        .map_err(err)?;
    to_py(py, &panel)
}

#[pymodule]
#[pyo3(name = "fiscal_default")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEconomy>()?;
    m.add_class::<PyEdSolution>()?;
    m.add_class::<PyAmssSolution>()?;
    m.add_class::<PySimPath>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_amss, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(validate_path, m)?)?;
    m.add_function(wrap_pyfunction!(moments, m)?)?;
    m.add_function(wrap_pyfunction!(renegotiation_table, m)?)?;
    m.add_function(wrap_pyfunction!(impulse_response, m)?)?;
    m.add_function(wrap_pyfunction!(episodes, m)?)?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    Ok(())
}
