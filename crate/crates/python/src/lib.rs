use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::de::DeserializeOwned;
use serde::Serialize;

use oscillab_core::coefficients::{make_family, Coefficient, CoefficientField, FamilyParams};
use oscillab_core::harness::{check_theorem, run, Criterion, ExperimentConfig, RunReport};
use oscillab_core::lp::lp_selftest as core_lp_selftest;
use oscillab_core::regularize::{self, QuadratureSpec, RegularizedCoefficient};
use oscillab_core::solver::{self, solve_mode as core_solve_mode};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializes through JSON into plain Python objects.
fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(err)
}

fn point(x: &[f64]) -> PyResult<[f64; 2]> {
    match *x {
        [a] => Ok([a, 0.0]),
        [a, b] => Ok([a, b]),
        _ => Err(err(format!("a point has 1 or 2 coordinates, got {}", x.len()))),
    }
}

/// A coefficient family `A(t, x)`.
#[pyclass(name = "Family", module = "oscillab", frozen)]
struct PyFamily {
    inner: CoefficientField,
}

#[pymethods]
impl PyFamily {
    /// `Family("yamazaki-osc", profile="weierstrass", rho=0.5)`.
    #[new]
    #[pyo3(signature = (name, **params))]
    fn new(py: Python<'_>, name: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let p: FamilyParams = match params {
            Some(d) => from_py(py, d.as_any())?,
            None => FamilyParams::default(),
        };
        Ok(PyFamily {
            inner: make_family(name, &p).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn ell(&self) -> u8 {
        self.inner.ell
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn lambda0(&self) -> f64 {
        self.inner.lambda0
    }

    #[getter]
    fn big_lambda0(&self) -> f64 {
        self.inner.big_lambda0
    }

    /// Declared oscillation constants; `None` marks an unbounded one.
    #[getter]
    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.osc)
    }

    #[pyo3(signature = (t, x, j = 0, k = 0))]
    fn eval(&self, t: f64, x: Vec<f64>, j: usize, k: usize) -> PyResult<f64> {
        Ok(self.inner.eval(t, &point(&x)?, j, k))
    }

    #[pyo3(signature = (t, x, j = 0, k = 0))]
    fn eval_dt(&self, t: f64, x: Vec<f64>, j: usize, k: usize) -> PyResult<f64> {
        Ok(self.inner.eval_dt(t, &point(&x)?, j, k))
    }

    #[pyo3(signature = (t, x, j = 0, k = 0))]
    fn eval_dtt(&self, t: f64, x: Vec<f64>, j: usize, k: usize) -> PyResult<f64> {
        Ok(self.inner.eval_dtt(t, &point(&x)?, j, k))
    }

    /// The regularized coefficient at scale `eps`.
    #[pyo3(signature = (eps, nodes = 96))]
    fn regularize(&self, eps: f64, nodes: usize) -> PyResult<PyRegularized> {
        let quad = QuadratureSpec::new(nodes).map_err(err)?;
        Ok(PyRegularized {
            inner: RegularizedCoefficient::new(&self.inner, eps, &quad).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Family({:?}, dim={}, ell={})", self.inner.name, self.inner.dim, self.inner.ell)
    }
}

/// A family after time truncation, mollification and cutoff blending.
#[pyclass(name = "Regularized", module = "oscillab", frozen)]
struct PyRegularized {
    inner: RegularizedCoefficient,
}

#[pymethods]
impl PyRegularized {
    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    #[pyo3(signature = (t, x, j = 0, k = 0))]
    fn eval(&self, t: f64, x: Vec<f64>, j: usize, k: usize) -> PyResult<f64> {
        Ok(self.inner.eval(t, &point(&x)?, j, k))
    }

    #[pyo3(signature = (t, x, j = 0, k = 0))]
    fn eval_dt(&self, t: f64, x: Vec<f64>, j: usize, k: usize) -> PyResult<f64> {
        Ok(self.inner.eval_dt(t, &point(&x)?, j, k))
    }

    /// Regularized time profile and its first two derivatives.
    fn tau(&self, t: f64) -> (f64, f64, f64) {
        self.inner.tau(t)
    }
}

/// Envelope `phi_eps(t)` of the regularized time derivatives.
#[pyfunction]
fn phi(eps: f64, t: f64) -> PyResult<f64> {
    Ok(regularize::phi(eps).map_err(err)?.eval(t))
}

/// Block weight `f_nu(t)`.
#[pyfunction]
#[pyo3(signature = (nu, t, nodes = 96))]
fn f_weight(nu: usize, t: f64, nodes: usize) -> PyResult<f64> {
    Ok(regularize::f_weight(nu, t, &QuadratureSpec::new(nodes).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (n, big_lambda0, safety = 0.5))]
fn cfl_dt(n: usize, big_lambda0: f64, safety: f64) -> f64 {
    solver::cfl_dt(n, big_lambda0, safety)
}

/// Fundamental matrix of `v'' + a(t) xi^2 v = 0` at the sample times.
#[pyfunction]
#[pyo3(signature = (family, xi, t0, t1, tol = 1e-10, samples = Vec::new()))]
fn solve_mode<'py>(
    py: Python<'py>,
    family: &PyFamily,
    xi: f64,
    t0: f64,
    t1: f64,
    tol: f64,
    samples: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let s = py
        .detach(|| core_solve_mode(&family.inner, xi, t0, t1, tol, &samples))
        .map_err(err)?;
    let n = s.samples.len();
    let d = PyDict::new(py);
    d.set_item("xi", xi)?;
    d.set_item("steps", s.steps)?;
    d.set_item("t", s.samples.iter().map(|m| m.t).collect::<Vec<_>>())?;
    d.set_item("a", s.samples.iter().map(|m| m.a).collect::<Vec<_>>())?;
    d.set_item("matrix", s.samples.iter().map(|m| m.m).collect::<Vec<_>>())?;
    d.set_item("wronskian", (0..n).map(|i| s.wronskian(i)).collect::<Vec<_>>())?;
    d.set_item("amplification", (0..n).map(|i| s.amplification(i)).collect::<Vec<_>>())?;
    Ok(d)
}

/// Littlewood-Paley identities on random fields.
#[pyfunction]
#[pyo3(signature = (dim = 1, n = 256, fields = 1000, seed = 0))]
fn lp_selftest<'py>(py: Python<'py>, dim: usize, n: usize, fields: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let r = py.detach(|| core_lp_selftest(dim, n, fields, seed)).map_err(err)?;
    let out = to_py(py, &r)?;
    out.set_item("pass", r.pass(1e-12))?;
    Ok(out)
}

/// Runs an experiment described by a TOML document and returns its report.
#[pyfunction]
fn run_config<'py>(py: Python<'py>, toml: &str) -> PyResult<Bound<'py, PyAny>> {
    let config = ExperimentConfig::parse(toml).map_err(err)?;
    let report = py.detach(|| run(&config)).map_err(err)?;
    to_py(py, &report)
}

/// Evaluates `no-loss`, `linear-loss` or `delta-family` on run reports.
#[pyfunction]
fn check<'py>(py: Python<'py>, reports: &Bound<'py, PyList>, criterion: &str) -> PyResult<Bound<'py, PyAny>> {
    let which: Criterion = criterion.parse().map_err(err)?;
    let rs = reports
        .iter()
        .map(|r| from_py::<RunReport>(py, &r))
        .collect::<PyResult<Vec<_>>>()?;
    to_py(py, &check_theorem(&rs, which).map_err(err)?)
}

#[pymodule]
fn oscillab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFamily>()?;
    m.add_class::<PyRegularized>()?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(f_weight, m)?)?;
    m.add_function(wrap_pyfunction!(cfl_dt, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mode, m)?)?;
    m.add_function(wrap_pyfunction!(lp_selftest, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add("FAMILIES", oscillab_core::coefficients::FAMILY_NAMES.to_vec())?;
    Ok(())
}
