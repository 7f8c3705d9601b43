//! Python bindings: configuration, simulation, certificates and analysis.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyList, PyString};
use serde_json::Value;

use hybrid_ei::analysis::{decay_fit, lyapunov_trace, zeno_recursion_oracle as oracle, zeno_report};
use hybrid_ei::certificates::{self as cert, CbarMode, ExampleConstants, SelectionInput};
use hybrid_ei::commands::{compare_runs, simulate as run_config};
use hybrid_ei::output::{events_csv, trajectory_csv};
use hybrid_ei::{Error, RunConfig, SimResult};

fn py_err(e: Error) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => PyFloat::new(py, n.as_f64().unwrap_or(f64::NAN)).into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let items = items.iter().map(|x| json_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(map) => {
            let d = PyDict::new(py);
            for (k, x) in map {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn cbar_mode(name: &str) -> PyResult<CbarMode> {
    match name {
        "full" => Ok(CbarMode::Full),
        "impulsive_only" => Ok(CbarMode::ImpulsiveOnly),
        _ => Err(PyValueError::new_err("cbar_mode must be 'full' or 'impulsive_only'")),
    }
}

/// Run configuration in the flat `key = value` format.
#[pyclass(name = "Config", module = "hybrid_ei")]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Self { inner: hybrid_ei::parse_config(text).map_err(py_err)? })
    }

    /// Sets one key and revalidates.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        let mut next = self.inner.clone();
        next.set(key, value).map_err(py_err)?;
        next.validate().map_err(py_err)?;
        self.inner = next;
        Ok(())
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.as_str()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Config(mode={}, h={}, horizon={})", self.inner.mode.as_str(), self.inner.h, self.inner.horizon)
    }
}

/// Result of one simulation run.
#[pyclass(name = "Simulation", module = "hybrid_ei")]
struct PySimulation {
    sim: SimResult,
    config: RunConfig,
}

#[pymethods]
impl PySimulation {
    #[getter]
    fn mode(&self) -> &'static str {
        self.sim.mode.name()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.sim.trajectory.times().to_vec()
    }

    /// Right-continuous states, one list per sample.
    #[getter]
    fn states(&self) -> Vec<Vec<f64>> {
        let traj = &self.sim.trajectory;
        (0..traj.len()).map(|i| traj.sample(i, hybrid_ei::Side::Right).to_vec()).collect()
    }

    #[getter]
    fn inputs(&self) -> Vec<Vec<f64>> {
        self.sim.inputs_at_samples()
    }

    #[getter]
    fn event_times(&self) -> Vec<f64> {
        self.sim.events.times()
    }

    #[getter]
    fn feedback_updates(&self) -> usize {
        self.sim.feedback_updates()
    }

    #[getter]
    fn impulses(&self) -> usize {
        self.sim.impulses()
    }

    #[getter]
    fn final_time(&self) -> f64 {
        self.sim.final_time()
    }

    fn events<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.sim.events.records)
    }

    fn termination<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.sim.termination)
    }

    fn max_norm_on(&self, t_a: f64, t_b: f64) -> f64 {
        self.sim.max_norm_on(t_a, t_b)
    }

    #[pyo3(signature = (t_start = None))]
    fn decay_fit<'py>(&self, py: Python<'py>, t_start: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &decay_fit(&self.sim.trajectory, t_start.unwrap_or(self.config.fit_start())))
    }

    #[pyo3(signature = (dwell = None))]
    fn zeno_report<'py>(&self, py: Python<'py>, dwell: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &zeno_report(&self.sim, dwell))
    }

    /// Weighted series of `V = |x|^2`.
    fn lyapunov_trace<'py>(&self, py: Python<'py>, lam: f64) -> PyResult<Bound<'py, PyAny>> {
        let v = |x: &[f64]| x.iter().map(|c| c * c).sum();
        to_py(py, &lyapunov_trace(&self.sim.trajectory, v, lam, self.sim.t0))
    }

    fn trajectory_csv(&self) -> String {
        trajectory_csv(&self.sim)
    }

    fn events_csv(&self) -> String {
        events_csv(&self.sim)
    }

    fn __repr__(&self) -> String {
        format!(
            "Simulation(mode={}, final_time={}, updates={})",
            self.sim.mode.name(),
            self.sim.final_time(),
            self.sim.events.len()
        )
    }
}

#[pyfunction]
fn parse_config(text: &str) -> PyResult<PyConfig> {
    PyConfig::new(text)
}

#[pyfunction]
fn simulate(config: &PyConfig) -> PyResult<PySimulation> {
    let sim = run_config(&config.inner).map_err(py_err)?;
    Ok(PySimulation { sim, config: config.inner.clone() })
}

/// Hybrid against impulsive-only control on the same constants.
#[pyfunction]
fn compare<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let (table, _) = compare_runs(&config.inner).map_err(py_err)?;
    to_py(py, &table)
}

#[pyfunction]
#[pyo3(signature = (b, k, r, sigma0, q, h, beta, cbar_mode = "full"))]
#[allow(clippy::too_many_arguments)]
fn certify<'py>(
    py: Python<'py>,
    b: f64,
    k: f64,
    r: f64,
    sigma0: f64,
    q: f64,
    h: f64,
    beta: f64,
    cbar_mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = self::cbar_mode(cbar_mode)?;
    let constants = ExampleConstants::new(b, k, r, sigma0, q, h, beta, mode);
    to_py(py, &cert::certify(&constants, mode).map_err(py_err)?)
}

#[pyfunction]
fn worked_example<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &ExampleConstants::worked_example())
}

#[pyfunction]
#[pyo3(signature = (b, k, target_h = None, r = 16.0, sigma0 = 0.36, cbar_mode = "full"))]
fn select_parameters<'py>(
    py: Python<'py>,
    b: f64,
    k: f64,
    target_h: Option<f64>,
    r: f64,
    sigma0: f64,
    cbar_mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mut input = SelectionInput::new(b, k);
    input.r = r;
    input.sigma0 = sigma0;
    input.target_h = target_h;
    input.mode = self::cbar_mode(cbar_mode)?;
    to_py(py, &cert::select_parameters(&input).map_err(py_err)?)
}

#[pyfunction]
fn feedback_margin(k: f64, b: f64, q: f64, sigma0: f64) -> f64 {
    cert::feedback_margin(k, b, q, sigma0)
}

#[pyfunction]
#[pyo3(signature = (q, b, k, cbar_mode = "full"))]
fn cbar(q: f64, b: f64, k: f64, cbar_mode: &str) -> PyResult<f64> {
    Ok(cert::cbar(q, b.abs(), k.abs(), self::cbar_mode(cbar_mode)?))
}

#[pyfunction]
fn condition_iii_check<'py>(py: Python<'py>, q: f64, rho: f64, cbar: f64, h: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &cert::condition_iii_check(q, rho, cbar, h))
}

/// Dwell bound for `cbar(q)` of the scalar family.
#[pyfunction]
#[pyo3(signature = (b, k, cbar_mode = "full"))]
fn dwell_bound<'py>(py: Python<'py>, b: f64, k: f64, cbar_mode: &str) -> PyResult<Bound<'py, PyAny>> {
    let mode = self::cbar_mode(cbar_mode)?;
    let (ab, ak) = (b.abs(), k.abs());
    to_py(py, &cert::dwell_bound(move |q| cert::cbar(q, ab, ak, mode)).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (h, b, k, cbar_mode = "full"))]
fn fixed_point_roots(h: f64, b: f64, k: f64, cbar_mode: &str) -> PyResult<(f64, f64)> {
    let mode = self::cbar_mode(cbar_mode)?;
    let (ab, ak) = (b.abs(), k.abs());
    cert::fixed_point_roots(h, move |q| cert::cbar(q, ab, ak, mode)).map_err(py_err)
}

#[pyfunction]
fn rho_interval(q1: f64, q2: f64) -> PyResult<(f64, f64)> {
    cert::rho_interval(q1, q2).map_err(py_err)
}

#[pyfunction]
fn zeno_recursion_oracle<'py>(
    py: Python<'py>,
    x0: f64,
    b: f64,
    k: f64,
    sigma0: f64,
    r: f64,
    t_max: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &oracle(x0, b, k, sigma0, r, t_max).map_err(py_err)?)
}

#[pymodule]
#[pyo3(name = "hybrid_ei")]
fn hybrid_ei_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(worked_example, m)?)?;
    m.add_function(wrap_pyfunction!(select_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(feedback_margin, m)?)?;
    m.add_function(wrap_pyfunction!(cbar, m)?)?;
    m.add_function(wrap_pyfunction!(condition_iii_check, m)?)?;
    m.add_function(wrap_pyfunction!(dwell_bound, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point_roots, m)?)?;
    m.add_function(wrap_pyfunction!(rho_interval, m)?)?;
    m.add_function(wrap_pyfunction!(zeno_recursion_oracle, m)?)?;
    Ok(())
}
