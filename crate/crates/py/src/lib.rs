//! Python bindings: distributions, divergences, extractors and samplers built
//! from the same JSON specs the `divext` CLI reads.

use divext::cli::{parse_json, ExtractorSpec, SamplerSpec};
use divext::compose::{self, Strength};
use divext::divergences::{self, DivergenceKind, SolverConfig};
use divext::domain;
use divext::samplers;
use divext::verify::{self, SourceFamily};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

fn err(e: divext::Error) -> PyErr {
    match e {
        divext::Error::Spec(_) | divext::Error::Range(_) | divext::Error::WidthMismatch(..) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn kind(text: &str) -> PyResult<DivergenceKind> {
    text.parse().map_err(err)
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let list = PyList::empty(py);
            for x in a {
                list.append(to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(o) => {
            let dict = PyDict::new(py);
            for (k, x) in o {
                dict.set_item(k, to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn ser<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &value)
}

/// Probability distribution on `{0,1}^width`.
#[pyclass(name = "Distribution", module = "pydivext", frozen)]
struct PyDistribution(domain::Distribution);

#[pymethods]
impl PyDistribution {
    #[new]
    fn new(width: u32, probs: Vec<f64>) -> PyResult<Self> {
        domain::Distribution::new(width, probs).map(Self).map_err(err)
    }

    #[staticmethod]
    fn uniform(width: u32) -> PyResult<Self> {
        domain::Distribution::uniform(width).map(Self).map_err(err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs().to_vec()
    }

    fn min_entropy(&self) -> f64 {
        domain::min_entropy(&self.0)
    }

    fn shannon_entropy(&self) -> f64 {
        domain::shannon_entropy(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("Distribution(width={}, probs={:?})", self.0.width(), self.0.probs())
    }
}

/// `(lower, upper, exact)` for `kind` such as `"kl"`, `"renyi:2"`, `"subgaussian"`.
#[pyfunction]
fn divergence(kind_name: &str, p: &PyDistribution, q: &PyDistribution) -> PyResult<(f64, f64, bool)> {
    let r = divergences::divergence(kind(kind_name)?, &p.0, &q.0, &SolverConfig::default()).map_err(err)?;
    Ok((r.lower, r.upper, r.exact))
}

/// Extractor with its claim ledger.
#[pyclass(name = "Extractor", module = "pydivext", frozen)]
struct PyExtractor(compose::Extractor);

#[pymethods]
impl PyExtractor {
    /// Builds from a JSON spec, e.g. `{"kind": "lhl", "n": 4, "m": 1}`.
    #[staticmethod]
    fn from_spec(spec: &str) -> PyResult<Self> {
        parse_json::<ExtractorSpec>(spec).and_then(|s| s.build()).map(Self).map_err(err)
    }

    #[getter]
    fn label(&self) -> &str {
        self.0.label()
    }

    #[getter]
    fn n(&self) -> u32 {
        self.0.n()
    }

    #[getter]
    fn d(&self) -> u32 {
        self.0.d()
    }

    #[getter]
    fn m(&self) -> u32 {
        self.0.m()
    }

    fn eval(&self, x: u64, s: u64) -> PyResult<u64> {
        if x >> self.0.n() != 0 || s >> self.0.d() != 0 {
            return Err(PyValueError::new_err("source or seed wider than the extractor"));
        }
        Ok(self.0.eval(x, s))
    }

    fn claims<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        ser(py, &self.0.claims())
    }

    /// Smallest claimed error for the request, or `None`.
    #[pyo3(signature = (kind_name, k, strong = false, average = false))]
    fn claimed_error(&self, kind_name: &str, k: f64, strong: bool, average: bool) -> PyResult<Option<f64>> {
        Ok(self.0.claimed_error(kind(kind_name)?, k, Strength::from_flags(strong, average)))
    }

    /// Worst error over flat sources of min-entropy `k`; `family` is an
    /// optional JSON source-family spec.
    #[pyo3(signature = (kind_name, k, strong = false, family = None))]
    fn worst_error<'py>(
        &self,
        py: Python<'py>,
        kind_name: &str,
        k: f64,
        strong: bool,
        family: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let family = match family {
            Some(text) => parse_json::<SourceFamily>(text).map_err(err)?,
            None => SourceFamily::default(),
        };
        let kind = kind(kind_name)?;
        let report = py.detach(|| verify::worst_flat_error(&self.0, kind, k, &family, strong)).map_err(err)?;
        ser(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("Extractor({}, n={}, d={}, m={})", self.0.label(), self.0.n(), self.0.d(), self.0.m())
    }
}

/// Averaging sampler with its claims.
#[pyclass(name = "Sampler", module = "pydivext", frozen)]
struct PySampler(samplers::Sampler);

#[pymethods]
impl PySampler {
    /// Builds from a JSON spec, e.g. `{"kind": "pairwise", "m": 6, "delta": 0.25, "eps": 0.5}`.
    #[staticmethod]
    fn from_spec(spec: &str) -> PyResult<Self> {
        parse_json::<SamplerSpec>(spec).and_then(|s| s.build()).map(Self).map_err(err)
    }

    #[getter]
    fn label(&self) -> &str {
        self.0.label()
    }

    #[getter]
    fn n(&self) -> u32 {
        self.0.n()
    }

    #[getter]
    fn m(&self) -> u32 {
        self.0.m()
    }

    #[getter]
    fn samples(&self) -> u64 {
        self.0.samples()
    }

    fn points(&self, coins: u64) -> PyResult<Vec<u64>> {
        if coins >> self.0.n() != 0 {
            return Err(PyValueError::new_err("coins wider than the sampler"));
        }
        Ok(self.0.points(coins))
    }

    /// Empirical mean of `values` (a table over `{0,1}^m`) at `coins`.
    fn estimate(&self, values: Vec<f64>, coins: u64) -> PyResult<f64> {
        samplers::estimate_mean(&self.0, &values, coins).map_err(err)
    }

    fn claims<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        ser(py, &self.0.claims())
    }

    /// Failure fractions per claim over all coin strings and `functions`
    /// random certified class members.
    #[pyo3(signature = (functions = 200, seed = divext::cli::DEFAULT_SEED))]
    fn measure_failures<'py>(&self, py: Python<'py>, functions: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let reports = py.detach(|| samplers::measure_failures(&self.0, functions, seed)).map_err(err)?;
        ser(py, &reports)
    }
}

#[pymodule]
pub fn pydivext(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyExtractor>()?;
    m.add_class::<PySampler>()?;
    m.add_function(wrap_pyfunction!(divergence, m)?)?;
    Ok(())
}
