//! Python bindings. Systems and trees go in as JSON text in the same format
//! the CLI reads; reports come back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use wco_core::analysis::{self, GaussParams};
use wco_core::battery::{run_fuzz, Mutation};
use wco_core::gaussian_example::DEFAULT_BOX;
use wco_core::invariant_subspaces::aluthge_domain_gap;
use wco_core::matrix_oracle::to_matrix;
use wco_core::properties::is_weakly_centered;
use wco_core::tree_shifts::TreeShift;
use wco_core::wco_model::radon_nikodym;
use wco_core::{WcoError, WcoSystem};

fn core_err(e: WcoError) -> PyErr {
    match e {
        WcoError::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Round-trips through `json.loads` so callers get native dicts.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyfunction]
#[pyo3(signature = (system_json, tol = 1e-9))]
fn analyze<'py>(py: Python<'py>, system_json: &str, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let sys: WcoSystem = parse(system_json)?;
    to_py(py, &analysis::analyze(&sys, tol).map_err(core_err)?)
}

#[pyfunction]
#[pyo3(signature = (system_json, tol = 1e-9))]
fn oracle<'py>(py: Python<'py>, system_json: &str, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let sys: WcoSystem = parse(system_json)?;
    to_py(py, &analysis::oracle(&sys, tol).map_err(core_err)?)
}

#[pyfunction]
#[pyo3(signature = (system_json, tol = 1e-9))]
fn invariant<'py>(py: Python<'py>, system_json: &str, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let sys: WcoSystem = parse(system_json)?;
    to_py(py, &analysis::invariant(&sys, tol).map_err(core_err)?)
}

#[pyfunction]
#[pyo3(signature = (tree_json, interior_only = false, tol = 1e-9))]
fn tree<'py>(py: Python<'py>, tree_json: &str, interior_only: bool, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let shift: TreeShift = parse(tree_json)?;
    to_py(py, &analysis::analyze_tree(&shift, interior_only, tol))
}

#[pyfunction]
#[pyo3(signature = (alpha, coeffs = vec![1.0, 1.0], dim = 1, samples = 1000, seed = 42, non_polynomial = false, half_width = DEFAULT_BOX))]
#[allow(clippy::too_many_arguments)]
fn gauss<'py>(
    py: Python<'py>,
    alpha: f64,
    coeffs: Vec<f64>,
    dim: usize,
    samples: usize,
    seed: u64,
    non_polynomial: bool,
    half_width: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let params = GaussParams { alpha, coefficients: coeffs, is_polynomial: !non_polynomial, dim, samples, seed, half_width };
    to_py(py, &analysis::gauss(&params).map_err(core_err)?)
}

#[pyfunction]
#[pyo3(signature = (n = 20))]
fn rudy<'py>(py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &aluthge_domain_gap(n).map_err(core_err)?)
}

/// Runs the closed-form-vs-matrix battery; `mutation` is "none" or "negate_h".
#[pyfunction]
#[pyo3(signature = (count = 1000, seed = 42, max_atoms = 8, tol = 1e-9, mutation = "none"))]
fn fuzz<'py>(py: Python<'py>, count: usize, seed: u64, max_atoms: usize, tol: f64, mutation: &str) -> PyResult<Bound<'py, PyAny>> {
    let mutation = match mutation {
        "none" => Mutation::None,
        "negate_h" => Mutation::NegateHAtArgmax,
        other => return Err(PyValueError::new_err(format!("unknown mutation {other:?}; expected \"none\" or \"negate_h\""))),
    };
    let summary = py.detach(|| run_fuzz(count, seed, max_atoms, tol, mutation)).map_err(core_err)?;
    to_py(py, &summary)
}

#[pyfunction]
fn matrix<'py>(py: Python<'py>, system_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let sys: WcoSystem = parse(system_json)?;
    to_py(py, &to_matrix(&sys))
}

/// `h` in atom order.
#[pyfunction]
fn density(system_json: &str) -> PyResult<Vec<f64>> {
    let sys: WcoSystem = parse(system_json)?;
    Ok(radon_nikodym(&sys).h.into_inner())
}

#[pyfunction]
#[pyo3(signature = (system_json, tol = 1e-9))]
fn weakly_centered(system_json: &str, tol: f64) -> PyResult<bool> {
    let sys: WcoSystem = parse(system_json)?;
    Ok(is_weakly_centered(&sys, tol).verdict)
}

#[pymodule]
fn pywco(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(invariant, m)?)?;
    m.add_function(wrap_pyfunction!(tree, m)?)?;
    m.add_function(wrap_pyfunction!(gauss, m)?)?;
    m.add_function(wrap_pyfunction!(rudy, m)?)?;
    m.add_function(wrap_pyfunction!(fuzz, m)?)?;
    m.add_function(wrap_pyfunction!(matrix, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(weakly_centered, m)?)?;
    Ok(())
}
