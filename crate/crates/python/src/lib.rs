//! Python bindings: test functions, space norms, distance reports, split
//! multipliers and the verification suite. Structured results come back as
//! plain dicts and lists.

use ::harmex::extremal::{self, DistanceOptions, TheoremParams};
use ::harmex::norms::{self, NormOptions};
use ::harmex::verify::{self, SuiteOptions};
use ::harmex::{special_fn, HarmexError, IntervalSet, NormValue, SpaceFamily, SpaceParams, Theorem};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: HarmexError) -> PyErr {
    match e {
        HarmexError::Resolution(_) | HarmexError::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn norm_to_f64(v: NormValue) -> f64 {
    v.value().unwrap_or(f64::INFINITY)
}

fn interval_set(intervals: Vec<(f64, f64)>) -> PyResult<IntervalSet> {
    IntervalSet::from_intervals(intervals).map_err(to_py)
}

/// A harmonic test function on the unit ball of R^n.
#[pyclass(name = "TestFunction", module = "harmex", frozen, from_py_object)]
#[derive(Clone)]
struct PyTestFunction {
    spec: ::harmex::TestFunctionSpec,
}

#[pymethods]
impl PyTestFunction {
    #[staticmethod]
    fn poisson(n: usize) -> Self {
        Self { spec: ::harmex::TestFunctionSpec::poisson(n) }
    }

    #[staticmethod]
    #[pyo3(signature = (n, beta, rho0 = 1.0))]
    fn q_kernel(n: usize, beta: f64, rho0: f64) -> PyResult<Self> {
        Ok(Self { spec: ::harmex::TestFunctionSpec::q_kernel(n, beta, rho0).map_err(to_py)? })
    }

    #[staticmethod]
    fn p_alpha(n: usize, alpha: f64) -> PyResult<Self> {
        Ok(Self { spec: ::harmex::TestFunctionSpec::p_alpha(n, alpha).map_err(to_py)? })
    }

    #[staticmethod]
    fn polynomial(n: usize, coeffs: Vec<f64>) -> PyResult<Self> {
        Ok(Self { spec: ::harmex::TestFunctionSpec::polynomial(n, coeffs).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, seed, decay = 1.0, degree = 10))]
    fn random(n: usize, seed: u64, decay: f64, degree: usize) -> PyResult<Self> {
        Ok(Self { spec: ::harmex::TestFunctionSpec::random(n, seed, decay, degree).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: ::harmex::TestFunctionSpec = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        spec.validate().map_err(to_py)?;
        Ok(Self { spec })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.spec).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn n(&self) -> usize {
        self.spec.n
    }

    #[getter]
    fn label(&self) -> String {
        self.spec.label()
    }

    #[getter]
    fn is_infinite(&self) -> bool {
        self.spec.is_infinite()
    }

    /// Zonal coefficients `a_0..=a_k_max`.
    fn coefficients(&self, k_max: usize) -> PyResult<Vec<f64>> {
        Ok(self.spec.expansion(k_max).map_err(to_py)?.coeffs)
    }

    /// Value at radius `r` and cosine `s` to the pole.
    fn evaluate(&self, r: f64, s: f64) -> PyResult<f64> {
        ::harmex::harmonic_model::evaluate(&self.spec, r, s, &Default::default()).map_err(to_py)
    }

    /// `M_q(f, r)`; `q = float("inf")` gives the maximum.
    fn integral_mean(&self, q: f64, r: f64) -> PyResult<f64> {
        norms::integral_mean(&self.spec, q, r, &NormOptions::default()).map_err(to_py)
    }

    /// Norm in a space family (`B_pq`, `B_inf_q`, `B_p_inf`, `A_p_alpha`,
    /// `A_inf_alpha`, `M_beta_alpha`, `M_p_beta_alpha`); `inf` when divergent.
    #[pyo3(signature = (family, alpha, p = 1.0, q = 1.0, beta = 0.0))]
    fn norm(&self, family: &str, alpha: f64, p: f64, q: f64, beta: f64) -> PyResult<f64> {
        let family: SpaceFamily =
            serde_json::from_value(serde_json::Value::String(family.into())).map_err(|_| PyValueError::new_err(format!("unknown space family {family:?}")))?;
        let space = SpaceParams::new(family, p, q, alpha, beta).map_err(to_py)?;
        Ok(norm_to_f64(norms::space_norm(&self.spec, &space, &NormOptions::default()).map_err(to_py)?))
    }

    fn __repr__(&self) -> String {
        format!("TestFunction({})", self.spec.label())
    }
}

/// Distance bracket of `f` for a theorem tag (`T3`, `T4`, `T5`, `T6`, `Tfinal`).
#[pyfunction]
#[pyo3(signature = (f, theorem, alpha, p = 1.0, beta = 1.0, t = None, epsilons = None))]
fn distance_report(
    py: Python<'_>,
    f: &PyTestFunction,
    theorem: &str,
    alpha: f64,
    p: f64,
    beta: f64,
    t: Option<f64>,
    epsilons: Option<Vec<f64>>,
) -> PyResult<Py<PyAny>> {
    let theorem = Theorem::parse(theorem).map_err(to_py)?;
    let params = TheoremParams { alpha, beta, p, t };
    let opts = DistanceOptions { epsilon_grid: epsilons, ..DistanceOptions::default() };
    let report = py.detach(|| extremal::distance_report(&f.spec, theorem, &params, &opts)).map_err(to_py)?;
    json_to_py(py, &report)
}

/// Split multipliers `w_0..=w_k_max` of a level set given as `[(a, b), ...]`.
#[pyfunction]
fn split_weights(n: usize, order: f64, intervals: Vec<(f64, f64)>, k_max: usize) -> PyResult<Vec<f64>> {
    extremal::split_weights(n, order, &interval_set(intervals)?, k_max).map_err(to_py)
}

/// Level set `{r : profile(r) >= eps}` of `(1-r)^alpha M_q(f, r)`.
#[pyfunction]
#[pyo3(signature = (f, alpha, epsilon, q = 1.0))]
fn level_set(f: &PyTestFunction, alpha: f64, epsilon: f64, q: f64) -> PyResult<Vec<(f64, f64)>> {
    let profile = norms::RadialProfile::compute(&f.spec, &norms::ProfileSpec::mean(q, alpha), &NormOptions::default()).map_err(to_py)?;
    Ok(extremal::level_set(&profile, epsilon).map_err(to_py)?.intervals().to_vec())
}

#[pyfunction]
fn kernel_coefficient(k: usize, alpha: f64, n: usize) -> PyResult<f64> {
    special_fn::kernel_coefficient(k, alpha, n).map_err(to_py)
}

#[pyfunction]
fn zonal_value(k: usize, n: usize, s: f64) -> PyResult<f64> {
    special_fn::zonal_value(k, n, s).map_err(to_py)
}

#[pyfunction]
fn radial_moment(k: usize, alpha: f64, n: usize, intervals: Vec<(f64, f64)>) -> PyResult<f64> {
    special_fn::radial_moment(k, alpha, n, &interval_set(intervals)?).map_err(to_py)
}

/// The verification suite as a list of report dicts.
#[pyfunction]
#[pyo3(signature = (seed = 7))]
fn run_suite(py: Python<'_>, seed: u64) -> PyResult<Py<PyAny>> {
    let opts = SuiteOptions { seed, ..SuiteOptions::default() };
    let reports = py.detach(|| verify::run_suite(&opts)).map_err(to_py)?;
    json_to_py(py, &reports)
}

#[pymodule]
#[pyo3(name = "harmex")]
pub fn harmex_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTestFunction>()?;
    m.add_function(wrap_pyfunction!(distance_report, m)?)?;
    m.add_function(wrap_pyfunction!(split_weights, m)?)?;
    m.add_function(wrap_pyfunction!(level_set, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(zonal_value, m)?)?;
    m.add_function(wrap_pyfunction!(radial_moment, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
