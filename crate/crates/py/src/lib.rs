//! Python bindings. Sources are passed as JSON text (the CLI source format),
//! matrices as nested lists of `"p/q"` strings or numbers; results come back
//! as plain dicts and lists.

use affdim_core::linalg::{self, RationalMatrix};
use affdim_core::ma::{self, BidMode, MaConfig};
use affdim_core::rational::{format_rational, from_f64_exact, parse_rational};
use affdim_core::{decompose as dec, drb, empirical, rid, Error, Rational, SourceSpec};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde_json::{json, Value};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::PurelyDiscrete
        | Error::NonFinite(_)
        | Error::ZeroMatrix
        | Error::NoConvergence(_)
        | Error::EmptyBatch => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

type CoreResult<T> = std::result::Result<T, Error>;

/// Matrix entry: `"p/q"`, a decimal string, an int or an exactly representable float.
#[derive(Debug, Clone, FromPyObject)]
pub enum Entry {
    Text(String),
    Int(i64),
    Float(f64),
}

fn entry_rational(e: &Entry) -> CoreResult<Rational> {
    match e {
        Entry::Text(s) => parse_rational(s),
        Entry::Int(i) => Ok(Rational::from_integer((*i).into())),
        Entry::Float(x) => from_f64_exact(*x).ok_or(Error::NonFinite("matrix entry")),
    }
}

pub fn matrix_of(rows: &[Vec<Entry>]) -> CoreResult<RationalMatrix> {
    let rows = rows
        .iter()
        .map(|r| r.iter().map(entry_rational).collect::<CoreResult<Vec<_>>>())
        .collect::<CoreResult<Vec<_>>>()?;
    RationalMatrix::from_rows(rows)
}

pub fn rid_value(source: &str, a: &RationalMatrix, mc: Option<usize>, seed: u64) -> CoreResult<Value> {
    let spec = SourceSpec::from_json_str(source)?;
    let r = match mc {
        Some(n) => rid::rid_linear_mc(&spec, a, n, seed)?,
        None => rid::rid_linear(&spec, a)?,
    };
    Ok(serde_json::to_value(r)?)
}

pub fn decompose_value(source: &str, a: &RationalMatrix, audit: bool, entropies: bool) -> CoreResult<Value> {
    let spec = SourceSpec::from_json_str(source)?;
    let mut d = dec::decompose(&spec, a)?;
    if entropies {
        dec::attach_entropies(&spec, a, &mut d);
    }
    Ok(json!({
        "components": d.to_json(spec.dim(), audit),
        "selector_entropy_bits": d.selector_entropy_bits,
        "rid": format_rational(&rid::rid_of_decomposition(&d)),
    }))
}

pub fn drb_value(source: &str, a: &RationalMatrix) -> CoreResult<Value> {
    let spec = SourceSpec::from_json_str(source)?;
    Ok(serde_json::to_value(drb::drb_linear(&spec, a)?)?)
}

pub fn bid_value(taps: &str, alpha: &str, ms: &[usize], l1: usize) -> CoreResult<Value> {
    let cfg = MaConfig::parse(taps, l1, alpha)?;
    Ok(serde_json::to_value(ma::bid_report(&cfg, ms, BidMode::Exact)?)?)
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (PyString::new(py, &v.to_string()),))?.unbind())
}

fn matrix_arg(rows: Vec<Vec<Entry>>) -> PyResult<RationalMatrix> {
    matrix_of(&rows).map_err(to_py_err)
}

/// Information dimension of `Y = A X`: exact, or Monte Carlo when `mc` is given.
#[pyfunction]
#[pyo3(signature = (source, matrix, mc=None, seed=0))]
fn rid_linear(py: Python<'_>, source: &str, matrix: Vec<Vec<Entry>>, mc: Option<usize>, seed: u64) -> PyResult<Py<PyAny>> {
    let a = matrix_arg(matrix)?;
    let v = py.detach(|| rid_value(source, &a, mc, seed)).map_err(to_py_err)?;
    to_py(py, &v)
}

#[pyfunction]
#[pyo3(signature = (source, matrix, audit=false, entropies=false))]
fn decompose(py: Python<'_>, source: &str, matrix: Vec<Vec<Entry>>, audit: bool, entropies: bool) -> PyResult<Py<PyAny>> {
    let a = matrix_arg(matrix)?;
    let v = py.detach(|| decompose_value(source, &a, audit, entropies)).map_err(to_py_err)?;
    to_py(py, &v)
}

#[pyfunction]
fn drb_linear(py: Python<'_>, source: &str, matrix: Vec<Vec<Entry>>) -> PyResult<Py<PyAny>> {
    let a = matrix_arg(matrix)?;
    let v = py.detach(|| drb_value(source, &a)).map_err(to_py_err)?;
    to_py(py, &v)
}

/// Slope of quantized entropy against `log2 m` over `scales`.
#[pyfunction]
#[pyo3(signature = (source, matrix, scales, samples=1_000_000, seed=0))]
fn empirical_rid(
    py: Python<'_>,
    source: &str,
    matrix: Vec<Vec<Entry>>,
    scales: Vec<u64>,
    samples: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let a = matrix_arg(matrix)?;
    let v = py
        .detach(|| -> CoreResult<Value> {
            let spec = SourceSpec::from_json_str(source)?;
            Ok(serde_json::to_value(empirical::empirical_rid(&spec, &a, &scales, samples, seed)?)?)
        })
        .map_err(to_py_err)?;
    to_py(py, &v)
}

#[pyfunction]
fn rank(matrix: Vec<Vec<Entry>>) -> PyResult<usize> {
    Ok(linalg::rank(&matrix_arg(matrix)?))
}

#[pyfunction]
fn spark(matrix: Vec<Vec<Entry>>) -> PyResult<usize> {
    linalg::spark(&matrix_arg(matrix)?).map_err(to_py_err)
}

/// Exact `d(Y^m)/m` rows for an MA process with taps `"a,b,c"`.
#[pyfunction]
#[pyo3(signature = (taps, alpha, ms, l1=0))]
fn ma_bid(py: Python<'_>, taps: &str, alpha: &str, ms: Vec<usize>, l1: usize) -> PyResult<Py<PyAny>> {
    let v = py.detach(|| bid_value(taps, alpha, &ms, l1)).map_err(to_py_err)?;
    to_py(py, &v)
}

#[pyfunction]
#[pyo3(signature = (taps, alpha, n, k, l1=0))]
fn concentration_bounds(py: Python<'_>, taps: &str, alpha: &str, n: usize, k: usize, l1: usize) -> PyResult<Py<PyAny>> {
    let cfg = MaConfig::parse(taps, l1, alpha).map_err(to_py_err)?;
    let b = ma::concentration_bounds(&cfg, n, k).map_err(to_py_err)?;
    to_py(py, &serde_json::to_value(b).map_err(|e| to_py_err(e.into()))?)
}

#[pyfunction]
fn sample_size_threshold(eps: f64, delta: f64, alpha: f64, l1: usize, l2: usize) -> PyResult<(f64, f64)> {
    let t = ma::sample_size_threshold(eps, delta, alpha, l1, l2).map_err(to_py_err)?;
    Ok((t.above, t.below))
}

/// `D(Bern(p) || Bern(q))` in nats.
#[pyfunction]
fn kl_bernoulli(p: f64, q: f64) -> f64 {
    ma::kl_bernoulli(p, q)
}

#[pymodule]
fn affdim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(rid_linear, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(drb_linear, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_rid, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(spark, m)?)?;
    m.add_function(wrap_pyfunction!(ma_bid, m)?)?;
    m.add_function(wrap_pyfunction!(concentration_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(sample_size_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(kl_bernoulli, m)?)?;
    Ok(())
}
