//! Python bindings for the model loader, certificate, simulator and
//! reproduction tables.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use tslv_core::cli::{certify, reproduce as reproduce_table};
use tslv_core::model::{load_model, load_model_file, ModelSpec, StatsConfig};
use tslv_core::sim::{simulate as run_simulation, SimConfig, Trajectory as CoreTrajectory};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_error(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        // non-finite floats travel as tagged strings
        Value::String(s) => match s.as_str() {
            "inf" => f64::INFINITY.into_pyobject(py)?.into_any(),
            "-inf" => f64::NEG_INFINITY.into_pyobject(py)?.into_any(),
            "nan" => f64::NAN.into_pyobject(py)?.into_any(),
            _ => s.into_pyobject(py)?.into_any(),
        },
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, item: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(item).map_err(runtime_error)?;
    to_py(py, &v)
}

/// A validated model.
#[pyclass(frozen, module = "tslv")]
struct Model {
    spec: ModelSpec,
}

#[pymethods]
impl Model {
    /// Loads a model file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let spec = load_model_file(path).map_err(value_error)?;
        Ok(Self { spec })
    }

    /// Parses a model document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec = load_model(text).map_err(value_error)?;
        Ok(Self { spec })
    }

    #[getter]
    fn n(&self) -> usize {
        self.spec.n
    }

    #[getter]
    fn m(&self) -> usize {
        self.spec.m
    }

    #[getter]
    fn hash(&self) -> String {
        self.spec.hash.clone()
    }

    #[getter]
    fn is_lattice(&self) -> bool {
        self.spec.ts.is_lattice()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(n={}, m={}, hash={})",
            self.spec.n,
            self.spec.m,
            &self.spec.hash[..12]
        )
    }
}

/// Sampled trajectory. Impulse times appear twice, before and after the jump.
#[pyclass(frozen, module = "tslv")]
struct Trajectory {
    inner: CoreTrajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.t).collect()
    }

    /// Prey densities, one row per sample.
    #[getter]
    fn z(&self) -> Vec<Vec<f64>> {
        self.inner.samples.iter().map(|s| s.z.clone()).collect()
    }

    /// Predator densities, one row per sample.
    #[getter]
    fn w(&self) -> Vec<Vec<f64>> {
        self.inner.samples.iter().map(|s| s.w.clone()).collect()
    }

    #[getter]
    fn impulse(&self) -> Vec<bool> {
        self.inner.samples.iter().map(|s| s.impulse).collect()
    }

    #[getter]
    fn notes(&self) -> Vec<String> {
        self.inner.notes.clone()
    }

    fn impulse_count(&self) -> usize {
        self.inner.impulse_count()
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(runtime_error)?;
        self.inner
            .write_csv(std::io::BufWriter::new(file))
            .map_err(runtime_error)
    }
}

/// Statistics, hypotheses, permanence bounds and the stability certificate.
#[pyfunction]
#[pyo3(signature = (model, use_override = false, sample_window = 2000.0))]
fn check<'py>(py: Python<'py>, model: &Model, use_override: bool, sample_window: f64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = StatsConfig {
        use_override,
        window: sample_window,
        ..StatsConfig::default()
    };
    let report = py
        .detach(|| certify(&model.spec, &cfg, vec!["check".into()]))
        .map_err(value_error)?;
    serialize(py, &report)
}

#[pyfunction]
#[pyo3(signature = (model, horizon = 200.0, step = 0.01, init = None, seed = None))]
fn simulate(
    py: Python<'_>,
    model: &Model,
    horizon: f64,
    step: f64,
    init: Option<Vec<String>>,
    seed: Option<u64>,
) -> PyResult<Trajectory> {
    let cfg = SimConfig {
        horizon,
        step,
        initial: init,
        seed,
        ..SimConfig::default()
    };
    let inner = py.detach(|| run_simulation(&model.spec, &cfg)).map_err(runtime_error)?;
    Ok(Trajectory { inner })
}

/// Published against computed values for bundled example 1 or 2.
#[pyfunction]
fn reproduce(py: Python<'_>, example: u8) -> PyResult<Bound<'_, PyAny>> {
    let table = reproduce_table(example).map_err(value_error)?;
    serialize(py, &table)
}

#[pymodule]
fn tslv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Trajectory>()?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    Ok(())
}
