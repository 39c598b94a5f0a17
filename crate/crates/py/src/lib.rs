//! Python bindings for the `crosspkg` core.

use std::path::PathBuf;

use crosspkg::features::{self, FeatureSchema, SensitiveDictionary};
use crosspkg::ingest::{open_archive_with, IngestLimits};
use crosspkg::lexing::{lex_javascript, lex_package_json, lex_python, TokenKind};
use crosspkg::models::{self, Hyperparams, Matrix, ModelKind, TreeEnsembleModel};
use crosspkg::scanner::{scan_package, ModelSet, NamedModel, ScanOptions};
use crosspkg::tuning::{self, CvConfig};
use crosspkg::Ecosystem;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyList, PyString};
use serde_json::Value;

create_exception!(crosspkg_py, CrosspkgError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    CrosspkgError::new_err(e.to_string())
}

fn ecosystem(s: &str) -> PyResult<Ecosystem> {
    s.parse().map_err(|e: crosspkg::ParseEcosystemError| PyValueError::new_err(e.to_string()))
}

fn learner(s: &str) -> PyResult<ModelKind> {
    s.parse().map_err(|e: String| PyValueError::new_err(e))
}

fn hyperparams(kind: ModelKind, json: Option<&str>) -> PyResult<Hyperparams> {
    let Some(text) = json else {
        return Ok(Hyperparams::default_for(kind));
    };
    let mut v: Value = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let obj = v.as_object_mut().ok_or_else(|| PyValueError::new_err("hyperparameters must be a JSON object"))?;
    obj.entry("kind").or_insert_with(|| kind.as_str().into());
    let hp: Hyperparams = serde_json::from_value(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    if hp.kind() != kind {
        return Err(PyValueError::new_err(format!("hyperparameters are for {}, learner is {kind}", hp.kind())));
    }
    hp.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(hp)
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    let width = rows.first().map_or(0, Vec::len);
    Matrix::from_rows(rows, width).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any().unbind(),
            None => PyFloat::new(py, n.as_f64().unwrap_or(f64::NAN)).into_any().unbind(),
        },
        Value::String(s) => PyString::new(py, s).into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    to_py(py, &serde_json::to_value(value).map_err(err)?)
}

fn dictionary(path: Option<PathBuf>) -> PyResult<SensitiveDictionary> {
    match path {
        Some(p) => SensitiveDictionary::load(&p).map_err(err),
        None => Ok(SensitiveDictionary::default_seed()),
    }
}

/// Ordered feature names and extension list.
#[pyclass(name = "FeatureSchema", module = "crosspkg_py", from_py_object)]
#[derive(Clone)]
struct PySchema {
    inner: FeatureSchema,
}

#[pymethods]
impl PySchema {
    #[new]
    fn new() -> Self {
        PySchema { inner: FeatureSchema::default() }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        FeatureSchema::load(&path).map(|inner| PySchema { inner }).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        FeatureSchema::from_json(text).map(|inner| PySchema { inner }).map_err(err)
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names.clone()
    }

    #[getter]
    fn version(&self) -> String {
        self.inner.version.clone()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_pretty()
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.inner.index_of(name)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Trained learner plus its schema and decision threshold.
#[pyclass(name = "Model", module = "crosspkg_py", from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: TreeEnsembleModel,
}

#[pymethods]
impl PyModel {
    /// Fit on rows `x` and labels `y` (True = malicious).
    #[staticmethod]
    #[pyo3(signature = (x, y, learner="gbt", hyperparams=None, seed=0, schema=None))]
    fn train(
        x: Vec<Vec<f64>>,
        y: Vec<bool>,
        learner: &str,
        hyperparams: Option<&str>,
        seed: u64,
        schema: Option<PySchema>,
    ) -> PyResult<Self> {
        let hp = self::hyperparams(self::learner(learner)?, hyperparams)?;
        let schema = schema.map(|s| s.inner).unwrap_or_default();
        let rows: Vec<features::FeatureVector> = x
            .into_iter()
            .map(|values| {
                let mut v = features::FeatureVector::zeros(&schema);
                v.values = values;
                v
            })
            .collect();
        models::train(&schema, &rows, &y, &hp, seed).map(|inner| PyModel { inner }).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        models::load_model(&path).map(|inner| PyModel { inner }).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        models::save_model(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn degenerate(&self) -> bool {
        self.inner.is_degenerate()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.decision_threshold
    }

    #[setter]
    fn set_threshold(&mut self, t: f64) -> PyResult<()> {
        if !(t > 0.0 && t < 1.0) {
            return Err(PyValueError::new_err("threshold must be in (0, 1)"));
        }
        self.inner.decision_threshold = t;
        Ok(())
    }

    #[getter]
    fn schema_hash(&self) -> String {
        self.inner.schema_hash.clone()
    }

    fn predict_proba(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let width = self.inner.schema.len();
        if let Some(bad) = x.iter().find(|r| r.len() != width) {
            return Err(PyValueError::new_err(format!("row has {} values, model expects {width}", bad.len())));
        }
        Ok(x.iter().map(|r| self.inner.predict_values(r).probability).collect())
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<bool>> {
        let t = self.inner.decision_threshold;
        Ok(self.predict_proba(x)?.into_iter().map(|p| p > t).collect())
    }

    fn feature_importance(&self) -> Vec<(String, f64)> {
        self.inner.feature_importance().into_iter().collect()
    }

    #[pyo3(signature = (n=10))]
    fn top_features(&self, n: usize) -> Vec<(String, f64)> {
        self.inner.top_features(n)
    }
}

/// Feature vector of one archive, with lexer diagnostics.
#[pyfunction]
#[pyo3(signature = (path, ecosystem, schema=None, dictionary=None))]
fn extract(
    py: Python<'_>,
    path: PathBuf,
    ecosystem: &str,
    schema: Option<PySchema>,
    dictionary: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let eco = self::ecosystem(ecosystem)?;
    let schema = schema.map(|s| s.inner).unwrap_or_default();
    let dict = self::dictionary(dictionary)?;
    let art = open_archive_with(&path, eco, IngestLimits::default()).map_err(err)?;
    let ex = features::extract_detailed(&art, &schema, &dict);
    let out = PyDict::new(py);
    out.set_item("name", &art.name)?;
    out.set_item("version", &art.version)?;
    out.set_item("values", ex.vector.values)?;
    out.set_item("truncated", ex.truncated)?;
    out.set_item("lex_error", ex.lex_error)?;
    Ok(out.into_any().unbind())
}

/// Tokens of a source blob as `(kind, text, byte_offset)`; language is js, py or json.
#[pyfunction]
fn lex(source: &[u8], language: &str) -> PyResult<(Vec<(&'static str, String, usize)>, bool)> {
    let ts = match language {
        "js" => lex_javascript(source),
        "py" => lex_python(source),
        "json" => lex_package_json(source),
        other => return Err(PyValueError::new_err(format!("unknown language {other}"))),
    };
    let kind = |k: TokenKind| match k {
        TokenKind::String => "string",
        TokenKind::Identifier => "identifier",
        TokenKind::Operator => "operator",
        TokenKind::Punctuation => "punctuation",
    };
    Ok((ts.tokens.into_iter().map(|t| (kind(t.kind), t.text, t.byte_offset)).collect(), ts.lex_error))
}

#[pyfunction]
fn gl4_encode(s: &str) -> String {
    features::gl4_encode(s)
}

#[pyfunction]
fn gl4_entropy(s: &str) -> f64 {
    features::gl4::gl4_entropy(s)
}

/// Repeated stratified k-fold CV; returns mean/std metrics and per-fold rows.
#[pyfunction]
#[pyo3(signature = (x, y, learner="gbt", hyperparams=None, k=5, repeats=10, seed=0))]
fn cross_validate(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<bool>,
    learner: &str,
    hyperparams: Option<&str>,
    k: usize,
    repeats: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let hp = self::hyperparams(self::learner(learner)?, hyperparams)?;
    let report = py
        .detach(|| tuning::cross_validate(&matrix(&x)?, &y, &hp, &CvConfig { k, repeats, seed }).map_err(err))?;
    serialize_to_py(py, &report)
}

/// Verdict for one archive under the named models, as a dict.
#[pyfunction]
#[pyo3(signature = (path, ecosystem, models, top_features=10, dictionary=None))]
fn scan(
    py: Python<'_>,
    path: PathBuf,
    ecosystem: &str,
    models: Vec<(String, PyModel)>,
    top_features: usize,
    dictionary: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let eco = self::ecosystem(ecosystem)?;
    let set = ModelSet::new(models.into_iter().map(|(id, m)| NamedModel { id, model: m.inner }).collect())
        .map_err(err)?;
    let opts = ScanOptions { dictionary: self::dictionary(dictionary)?, top_features, ..Default::default() };
    let verdict = scan_package(&path, eco, &set, &opts);
    serialize_to_py(py, &verdict)
}

/// Seeded synthetic labeled rows `(x, y)` for one ecosystem.
#[pyfunction]
#[pyo3(signature = (ecosystem, n_benign, n_malicious, seed=0))]
fn synthetic_dataset(
    ecosystem: &str,
    n_benign: usize,
    n_malicious: usize,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<bool>)> {
    let eco = self::ecosystem(ecosystem)?;
    let ds = crosspkg::synth::synthetic_dataset(
        eco,
        n_benign,
        n_malicious,
        seed,
        &FeatureSchema::default(),
        &SensitiveDictionary::default_seed(),
    );
    let y = ds.labels();
    Ok((ds.samples.into_iter().map(|s| s.vector.values).collect(), y))
}

/// Write a synthetic package archive and return its path.
#[pyfunction]
#[pyo3(signature = (directory, ecosystem, malicious, seed=0))]
fn write_synthetic_package(directory: PathBuf, ecosystem: &str, malicious: bool, seed: u64) -> PyResult<PathBuf> {
    let eco = self::ecosystem(ecosystem)?;
    let (b, m) = if malicious { (0, 1) } else { (1, 0) };
    let pkg = crosspkg::synth::generate_corpus(eco, b, m, seed).pop().expect("one package requested");
    let path = directory.join(pkg.archive_file_name());
    std::fs::write(&path, pkg.archive_bytes()).map_err(err)?;
    Ok(path)
}

#[pymodule]
fn crosspkg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CrosspkgError", m.py().get_type::<CrosspkgError>())?;
    m.add_class::<PySchema>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(lex, m)?)?;
    m.add_function(wrap_pyfunction!(gl4_encode, m)?)?;
    m.add_function(wrap_pyfunction!(gl4_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(write_synthetic_package, m)?)?;
    Ok(())
}
