//! Python bindings: formulas, counters, datasets, trees and whole-space metrics.

use std::time::Duration;

use num_bigint::BigUint;
use pyo3::exceptions::{PyRuntimeError, PyTimeoutError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use relcount::cnf::{emit_dimacs, parse_dimacs, CnfFormula};
use relcount::counter::{self, CountMode, CountResult};
use relcount::dataset::{self, SplitRatio};
use relcount::dtree::{self, TrainParams};
use relcount::metrics::{self, format_decimal, MetricsError};
use relcount::props::{self, PropertyId, PropertySpec};
use relcount::tree2cnf::side_cnf;

const DEFAULT_TIMEOUT: f64 = 5000.0;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn metrics_err(e: MetricsError) -> PyErr {
    match e {
        MetricsError::Partial { .. } => PyTimeoutError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn seconds(t: f64) -> PyResult<Duration> {
    Duration::try_from_secs_f64(t).map_err(value_err)
}

fn spec(property: &str, scope: usize) -> PyResult<PropertySpec> {
    let p: PropertyId = property.parse().map_err(value_err)?;
    PropertySpec::new(p, scope).map_err(value_err)
}

fn mode(name: &str, epsilon: f64, delta: f64, seed: u64) -> PyResult<CountMode> {
    match name {
        "exact" => Ok(CountMode::Exact),
        "brute" => Ok(CountMode::Brute),
        "approx" => Ok(CountMode::Approx { epsilon, delta, seed }),
        other => Err(value_err(format!("unknown mode '{other}' (exact, brute, approx)"))),
    }
}

/// CNF formula with an optional projection set.
#[pyclass(name = "Formula", module = "relcount", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFormula(CnfFormula);

#[pymethods]
impl PyFormula {
    #[staticmethod]
    fn from_dimacs(text: &str) -> PyResult<Self> {
        parse_dimacs(text).map(PyFormula).map_err(value_err)
    }

    fn to_dimacs(&self) -> String {
        emit_dimacs(&self.0)
    }

    #[getter]
    fn num_vars(&self) -> u32 {
        self.0.num_vars()
    }

    #[getter]
    fn num_clauses(&self) -> usize {
        self.0.num_clauses()
    }

    #[getter]
    fn projection(&self) -> Vec<u32> {
        self.0.projection().iter().map(|v| v.get()).collect()
    }

    fn conjoin(&self, other: &PyFormula) -> PyFormula {
        PyFormula(self.0.conjoin(&other.0))
    }

    fn satisfied_by(&self, values: Vec<bool>) -> bool {
        self.0.satisfied_by(&values)
    }

    fn __repr__(&self) -> String {
        format!(
            "Formula(vars={}, clauses={}, projection={})",
            self.0.num_vars(),
            self.0.num_clauses(),
            self.0.projection().len()
        )
    }
}

/// Encodes a named property at `scope`, optionally with the lex-leader breaker.
#[pyfunction]
#[pyo3(signature = (property, scope, symbreak = false))]
fn encode(property: &str, scope: usize, symbreak: bool) -> PyResult<PyFormula> {
    Ok(PyFormula(dataset::positive_formula(spec(property, scope)?, symbreak)))
}

/// Whether `matrix` (row-major, scope² booleans) has the property.
#[pyfunction]
fn evaluate(property: &str, scope: usize, matrix: Vec<bool>) -> PyResult<bool> {
    let s = spec(property, scope)?;
    let m = props::AdjacencyMatrix::new(s.scope(), matrix).map_err(value_err)?;
    Ok(props::evaluate(s.property, &m))
}

#[pyfunction]
fn properties() -> Vec<&'static str> {
    PropertyId::ALL.iter().map(|p| p.name()).collect()
}

fn count_or_timeout(r: CountResult) -> PyResult<BigUint> {
    r.count.ok_or_else(|| PyTimeoutError::new_err(format!("count timed out after {:.1} s", r.elapsed.as_secs_f64())))
}

/// Projected model count. Raises `TimeoutError` when the budget runs out.
#[pyfunction]
#[pyo3(signature = (formula, mode = "exact", epsilon = 0.8, delta = 0.2, seed = 0, timeout = DEFAULT_TIMEOUT))]
fn count(
    py: Python<'_>,
    formula: &PyFormula,
    mode: &str,
    epsilon: f64,
    delta: f64,
    seed: u64,
    timeout: f64,
) -> PyResult<BigUint> {
    let m = self::mode(mode, epsilon, delta, seed)?;
    let t = seconds(timeout)?;
    let f = formula.0.clone();
    let r = py.detach(move || counter::count(&f, m, t)).map_err(value_err)?;
    count_or_timeout(r)
}

/// Projected solutions as lists of booleans aligned with the projection.
#[pyfunction]
#[pyo3(signature = (formula, limit = None))]
fn enumerate(formula: &PyFormula, limit: Option<u64>) -> Vec<Vec<bool>> {
    counter::enumerate_solutions(&formula.0, limit).map(|a| a.into_values()).collect()
}

#[pyclass(name = "Dataset", module = "relcount", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset(dataset::Dataset);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn from_csv(csv: &str, meta: &str) -> PyResult<Self> {
        dataset::Dataset::from_csv(csv, meta).map(PyDataset).map_err(value_err)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn meta(&self) -> String {
        self.0.meta()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn positives(&self) -> usize {
        self.0.positives()
    }

    #[getter]
    fn negatives(&self) -> usize {
        self.0.negatives()
    }

    #[getter]
    fn feature_count(&self) -> usize {
        self.0.feature_count()
    }

    /// Stratified split, e.g. `ratio="75:25"`.
    #[pyo3(signature = (ratio = "75:25", seed = 0))]
    fn split(&self, ratio: &str, seed: u64) -> PyResult<(PyDataset, PyDataset)> {
        let r: SplitRatio = ratio.parse().map_err(value_err)?;
        let (a, b) = dataset::split(&self.0, r, seed).map_err(value_err)?;
        Ok((PyDataset(a), PyDataset(b)))
    }
}

/// Balanced dataset, or one with `class_ratio` percent positives out of `total`.
#[pyfunction]
#[pyo3(signature = (property, scope, symbreak = false, seed = 0, class_ratio = None, total = 20_000, timeout = DEFAULT_TIMEOUT))]
#[allow(clippy::too_many_arguments)]
fn make_dataset(
    py: Python<'_>,
    property: &str,
    scope: usize,
    symbreak: bool,
    seed: u64,
    class_ratio: Option<u32>,
    total: usize,
    timeout: f64,
) -> PyResult<PyDataset> {
    let s = spec(property, scope)?;
    let t = seconds(timeout)?;
    let ds = py.detach(move || match class_ratio {
        None => dataset::make_balanced(s, symbreak, seed, t),
        Some(p) => dataset::make_ratio(s, symbreak, p, total, seed, t),
    });
    ds.map(PyDataset).map_err(value_err)
}

#[pyclass(name = "DecisionTree", module = "relcount", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTree(dtree::DecisionTree);

#[pymethods]
impl PyTree {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        dtree::DecisionTree::from_json(text).map(PyTree).map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn predict(&self, features: Vec<bool>) -> PyResult<bool> {
        self.0.predict(&features).map_err(value_err)
    }

    #[getter]
    fn feature_count(&self) -> usize {
        self.0.feature_count()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.0.num_nodes()
    }

    /// CNF of the inputs the tree labels `label`.
    fn side_cnf(&self, label: bool) -> PyFormula {
        PyFormula(side_cnf(&self.0, label))
    }

    /// Confusion counts and scores on labelled samples.
    fn evaluate<'py>(&self, py: Python<'py>, data: &PyDataset) -> PyResult<Bound<'py, PyDict>> {
        let m = dtree::eval_traditional(&self.0, &data.0).map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item("tp", m.tp)?;
        d.set_item("fp", m.fp)?;
        d.set_item("tn", m.tn)?;
        d.set_item("fn", m.fn_)?;
        scores_into(&d, &m.scores())?;
        Ok(d)
    }
}

fn scores_into(d: &Bound<'_, PyDict>, s: &metrics::Scores) -> PyResult<()> {
    for (k, v) in [("accuracy", &s.accuracy), ("precision", &s.precision), ("recall", &s.recall), ("f1", &s.f1)] {
        d.set_item(k, format_decimal(v, 4))?;
    }
    Ok(())
}

#[pyfunction]
#[pyo3(signature = (data, max_depth = None))]
fn train_cart(data: &PyDataset, max_depth: Option<usize>) -> PyResult<PyTree> {
    let params = TrainParams { max_depth, ..TrainParams::default() };
    dtree::train_cart(&data.0, params).map(PyTree).map_err(value_err)
}

/// Whole-space confusion counts of `tree` against `phi`.
#[pyfunction]
#[pyo3(signature = (phi, tree, mode = "exact", epsilon = 0.8, delta = 0.2, seed = 0, timeout = DEFAULT_TIMEOUT))]
#[allow(clippy::too_many_arguments)]
fn acc_mc<'py>(
    py: Python<'py>,
    phi: &PyFormula,
    tree: &PyTree,
    mode: &str,
    epsilon: f64,
    delta: f64,
    seed: u64,
    timeout: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = self::mode(mode, epsilon, delta, seed)?;
    let t = seconds(timeout)?;
    let (f, tr) = (phi.0.clone(), tree.0.clone());
    let c = py.detach(move || metrics::acc_mc(&f, &tr, m, t)).map_err(metrics_err)?;
    let d = PyDict::new(py);
    d.set_item("tp", c.tp.clone())?;
    d.set_item("fp", c.fp.clone())?;
    d.set_item("tn", c.tn.clone())?;
    d.set_item("fn", c.fn_.clone())?;
    scores_into(&d, &c.scores())?;
    Ok(d)
}

/// Whole-space agreement counts between two trees.
#[pyfunction]
#[pyo3(signature = (first, second, mode = "exact", epsilon = 0.8, delta = 0.2, seed = 0, timeout = DEFAULT_TIMEOUT))]
#[allow(clippy::too_many_arguments)]
fn diff_mc<'py>(
    py: Python<'py>,
    first: &PyTree,
    second: &PyTree,
    mode: &str,
    epsilon: f64,
    delta: f64,
    seed: u64,
    timeout: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = self::mode(mode, epsilon, delta, seed)?;
    let t = seconds(timeout)?;
    let (a, b) = (first.0.clone(), second.0.clone());
    let r = py.detach(move || metrics::diff_mc(&a, &b, m, t)).map_err(metrics_err)?;
    let d = PyDict::new(py);
    d.set_item("tt", r.tt.clone())?;
    d.set_item("tf", r.tf.clone())?;
    d.set_item("ft", r.ft.clone())?;
    d.set_item("ff", r.ff.clone())?;
    d.set_item("diff", format_decimal(&r.diff(), 4))?;
    d.set_item("sim", format_decimal(&r.sim(), 4))?;
    d.set_item("diff_percent", r.diff_percent())?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "relcount")]
fn relcount_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyFormula>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTree>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(properties, m)?)?;
    m.add_function(wrap_pyfunction!(count, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(make_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train_cart, m)?)?;
    m.add_function(wrap_pyfunction!(acc_mc, m)?)?;
    m.add_function(wrap_pyfunction!(diff_mc, m)?)?;
    Ok(())
}
