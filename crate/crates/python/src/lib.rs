//! Python bindings: statevectors, encodings, protocol sessions, Gram
//! matrices, the SVM and config-driven cross-validation.
//!
//! Structured arguments (feature maps, noise, configs) are plain dicts or
//! strings shaped like the TOML config keys, e.g. `{"kind": "rbf", "sigma":
//! 1.0, "features": 64}` or just `"linear"`.

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyString};
use serde::de::DeserializeOwned;
use serde::Serialize;

use dqk_core::encodings::{Encoder, FeatureMap, FeatureMapSpec};
use dqk_core::experiment::{run_experiment, validate as validate_config, ExperimentConfig};
use dqk_core::kernelml::{self, Convention, GramOptions, PsdRepair, SourceMode, SvmParams};
use dqk_core::protocol::{self as proto, ExecutionMode, SessionConfig, ShotEngine};
use dqk_core::sim::{self, NoiseLevel, NoiseModel, C64};

fn err(e: dqk_core::Error) -> PyErr {
    match e {
        dqk_core::Error::QubitIndex { .. } => PyIndexError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Deserialize a dict (or a bare kind name) through JSON.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>, tagged: bool) -> PyResult<T> {
    let py = obj.py();
    let text: String = if let Ok(s) = obj.cast::<PyString>() {
        let s = s.to_str()?;
        if tagged {
            serde_json::json!({ "kind": s }).to_string()
        } else {
            serde_json::Value::String(s.to_string()).to_string()
        }
    } else {
        py.import("json")?
            .call_method1("dumps", (obj,))?
            .extract()?
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn noise_model(noise: &Bound<'_, PyAny>) -> PyResult<NoiseModel> {
    if let Ok(level) = from_py::<NoiseLevel>(noise, false) {
        return NoiseModel::from_level(level).map_err(err);
    }
    let d = noise.cast::<PyDict>()?;
    let get = |k: &str| -> PyResult<f64> {
        d.get_item(k)?
            .ok_or_else(|| PyValueError::new_err(format!("noise needs `{k}`")))?
            .extract()
    };
    NoiseModel::custom(get("p1")?, get("p2")?).map_err(err)
}

#[pyclass(name = "StateVector", module = "dqk", skip_from_py_object)]
#[derive(Clone)]
struct PyStateVector(sim::StateVector);

#[pymethods]
impl PyStateVector {
    /// `n` qubits in |0…0⟩.
    #[new]
    fn new(n: usize) -> PyResult<Self> {
        sim::StateVector::new(n).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_real(amplitudes: Vec<f64>) -> PyResult<Self> {
        sim::StateVector::from_real(&amplitudes)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn from_complex(amplitudes: Vec<(f64, f64)>) -> PyResult<Self> {
        let amps = amplitudes
            .into_iter()
            .map(|(re, im)| C64::new(re, im))
            .collect();
        sim::StateVector::from_amplitudes(amps)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.0.num_qubits()
    }

    /// Amplitudes as `(re, im)` pairs.
    #[getter]
    fn amplitudes(&self) -> Vec<(f64, f64)> {
        self.0.amplitudes().iter().map(|a| (a.re, a.im)).collect()
    }

    fn h(&mut self, q: usize) -> PyResult<()> {
        self.0.apply(sim::Gate::H(q)).map_err(err)
    }

    fn x(&mut self, q: usize) -> PyResult<()> {
        self.0.apply(sim::Gate::X(q)).map_err(err)
    }

    fn z(&mut self, q: usize) -> PyResult<()> {
        self.0.apply(sim::Gate::Z(q)).map_err(err)
    }

    fn cx(&mut self, control: usize, target: usize) -> PyResult<()> {
        self.0.apply(sim::Gate::CX { control, target }).map_err(err)
    }

    fn prob_zero(&self, q: usize) -> PyResult<f64> {
        self.0.prob_zero(q).map_err(err)
    }

    /// ⟨self|other⟩ as a complex number.
    fn overlap(&self, other: &PyStateVector) -> PyResult<(f64, f64)> {
        let o = self.0.overlap(&other.0).map_err(err)?;
        Ok((o.re, o.im))
    }

    fn __repr__(&self) -> String {
        format!("StateVector(num_qubits={})", self.0.num_qubits())
    }
}

#[pyclass(name = "EncodedPoint", module = "dqk", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEncodedPoint(dqk_core::encodings::EncodedPoint);

#[pymethods]
impl PyEncodedPoint {
    #[getter]
    fn amplitudes(&self) -> Vec<f64> {
        self.0.amplitudes.clone()
    }

    #[getter]
    fn norm_factor(&self) -> f64 {
        self.0.norm_factor
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.0.num_qubits()
    }

    fn overlap(&self, other: &PyEncodedPoint) -> f64 {
        self.0.overlap(&other.0)
    }

    fn state(&self) -> PyResult<PyStateVector> {
        PyStateVector::from_real(self.0.amplitudes.clone())
    }

    fn __repr__(&self) -> String {
        format!(
            "EncodedPoint(num_qubits={}, norm_factor={})",
            self.0.num_qubits(),
            self.0.norm_factor
        )
    }
}

/// Encode `x` with a feature map; RFF maps draw from `shared_seed`.
#[pyfunction]
#[pyo3(signature = (x, kernel = None, shared_seed = 0))]
fn encode(
    x: Vec<f64>,
    kernel: Option<&Bound<'_, PyAny>>,
    shared_seed: u64,
) -> PyResult<PyEncodedPoint> {
    let map = match kernel {
        Some(k) => from_py::<FeatureMap>(k, true)?,
        None => FeatureMap::Linear,
    };
    let spec = FeatureMapSpec::new(map, x.len()).map_err(err)?;
    let enc = Encoder::new(spec, shared_seed).map_err(err)?;
    enc.encode(&x).map(PyEncodedPoint).map_err(err)
}

/// Closed-form kernel value of a feature map.
#[pyfunction]
#[pyo3(signature = (x, y, kernel = None))]
fn kernel_value(x: Vec<f64>, y: Vec<f64>, kernel: Option<&Bound<'_, PyAny>>) -> PyResult<f64> {
    let map = match kernel {
        Some(k) => from_py::<FeatureMap>(k, true)?,
        None => FeatureMap::Linear,
    };
    let spec = FeatureMapSpec::new(map, x.len()).map_err(err)?;
    if y.len() != x.len() {
        return Err(PyValueError::new_err("x and y differ in length"));
    }
    Ok(spec.kernel(&x, &y))
}

#[pyfunction]
fn swap_test_probability(a: &PyStateVector, b: &PyStateVector) -> PyResult<f64> {
    proto::swap_test_probability(&a.0, &b.0).map_err(err)
}

#[pyclass(name = "SessionConfig", module = "dqk", skip_from_py_object)]
#[derive(Clone)]
struct PySessionConfig(SessionConfig);

#[pymethods]
impl PySessionConfig {
    #[new]
    #[pyo3(signature = (qubits, shots = 1024, noise = None, shared_seed = 0, mode = "streaming", engine = "channel", obfuscate = true, adversary = false, repetitions = 1))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        qubits: usize,
        shots: usize,
        noise: Option<&Bound<'_, PyAny>>,
        shared_seed: u64,
        mode: &str,
        engine: &str,
        obfuscate: bool,
        adversary: bool,
        repetitions: usize,
    ) -> PyResult<Self> {
        let mut c = SessionConfig::new(qubits, shots);
        if let Some(n) = noise {
            c.noise = noise_model(n)?;
        }
        c.shared_seed = shared_seed;
        c.mode = serde_json::from_value::<ExecutionMode>(mode.into())
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        c.engine = serde_json::from_value::<ShotEngine>(engine.into())
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        c.obfuscate = obfuscate;
        c.adversary = adversary;
        c.repetitions = repetitions;
        c.validate().map_err(err)?;
        Ok(Self(c))
    }

    #[getter]
    fn required_qubits(&self) -> usize {
        self.0.required_qubits()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!(
            "SessionConfig(qubits={}, shots={}, noise={})",
            self.0.qubits,
            self.0.shots,
            self.0.noise.level.as_str()
        )
    }
}

/// Run one session on two encodings; returns the transcript as a dict.
#[pyfunction]
#[pyo3(signature = (a, b, config, session_id = 0, seed = 0))]
fn run_session<'py>(
    py: Python<'py>,
    a: &PyEncodedPoint,
    b: &PyEncodedPoint,
    config: &PySessionConfig,
    session_id: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let t = py
        .detach(|| proto::run_session_encoded(&a.0, &b.0, &config.0, session_id, seed))
        .map_err(err)?;
    to_py(py, &t)
}

#[pyclass(name = "Gram", module = "dqk", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGram(kernelml::GramEstimate);

#[pymethods]
impl PyGram {
    #[getter]
    fn size(&self) -> usize {
        self.0.size
    }

    /// Rows as lists.
    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        (0..self.0.size).map(|i| self.0.row(i).to_vec()).collect()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.0.size || j >= self.0.size {
            return Err(PyIndexError::new_err("index out of range"));
        }
        Ok(self.0.get(i, j))
    }

    fn min_eigenvalue(&self) -> f64 {
        self.0.min_eigenvalue()
    }

    /// Clipped negative eigenvalue mass, or None if never repaired.
    #[getter]
    fn clipped_mass(&self) -> Option<f64> {
        match self.0.repair {
            PsdRepair::None => None,
            PsdRepair::Clipped { clipped_mass } => Some(clipped_mass),
        }
    }

    fn psd_repair(&self) -> PyGram {
        PyGram(kernelml::psd_repair(&self.0))
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.stats)
    }

    fn __len__(&self) -> usize {
        self.0.size
    }

    fn __repr__(&self) -> String {
        format!(
            "Gram(size={}, source={}, convention={})",
            self.0.size,
            self.0.source.as_str(),
            self.0.convention.as_str()
        )
    }
}

fn gram_options(
    source: &str,
    convention: &str,
    session: Option<&PySessionConfig>,
    qubits: usize,
    seed: u64,
) -> PyResult<GramOptions> {
    let source: SourceMode =
        serde_json::from_value(source.into()).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let convention: Convention = serde_json::from_value(convention.into())
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let mut opts = match (source, session) {
        (SourceMode::Protocol, Some(s)) => {
            let mut s = s.0;
            s.qubits = qubits;
            GramOptions::protocol(s, seed)
        }
        (SourceMode::Protocol, None) => {
            GramOptions::protocol(SessionConfig::new(qubits, 1024), seed)
        }
        (s, _) => GramOptions::exact(s),
    };
    opts.convention = convention;
    Ok(opts)
}

/// Gram matrix of `points` (already scaled to [0, 1]).
#[pyfunction]
#[pyo3(signature = (points, kernel = None, source = "exact_quantum", convention = "sqrt_fidelity", session = None, seed = 0))]
fn assemble_gram(
    py: Python<'_>,
    points: Vec<Vec<f64>>,
    kernel: Option<&Bound<'_, PyAny>>,
    source: &str,
    convention: &str,
    session: Option<&PySessionConfig>,
    seed: u64,
) -> PyResult<PyGram> {
    let map = match kernel {
        Some(k) => from_py::<FeatureMap>(k, true)?,
        None => FeatureMap::Linear,
    };
    let dim = points.first().map_or(0, Vec::len);
    let spec = FeatureMapSpec::new(map, dim).map_err(err)?;
    let qubits = spec.num_qubits().map_err(err)?;
    let opts = gram_options(source, convention, session, qubits, seed)?;
    py.detach(|| kernelml::assemble_gram(&points, &spec, &opts, None))
        .map(PyGram)
        .map_err(err)
}

#[pyclass(name = "SvmModel", module = "dqk", frozen)]
struct PySvmModel(kernelml::SvmModel);

#[pymethods]
impl PySvmModel {
    #[getter]
    fn classes(&self) -> usize {
        self.0.classes
    }

    /// Support-vector indices of each binary submodel.
    #[getter]
    fn support(&self) -> Vec<Vec<usize>> {
        self.0.submodels.iter().map(|m| m.support.clone()).collect()
    }

    fn decision_values(&self, row: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.decision_values(&row).map_err(err)
    }

    /// Class index for a kernel row against the training set.
    fn predict(&self, row: Vec<f64>) -> PyResult<usize> {
        self.0.predict(&row).map_err(err)
    }

    fn dual_objectives(&self, gram: &PyGram) -> Vec<f64> {
        self.0
            .submodels
            .iter()
            .map(|m| m.dual_objective(&gram.0))
            .collect()
    }
}

#[pyfunction]
#[pyo3(signature = (gram, labels, c = 1.0, tol = 1e-3, max_passes = 200))]
fn train_svm(
    gram: &PyGram,
    labels: Vec<usize>,
    c: f64,
    tol: f64,
    max_passes: usize,
) -> PyResult<PySvmModel> {
    let params = SvmParams { c, tol, max_passes };
    kernelml::train_svm(&gram.0, &labels, &params)
        .map(PySvmModel)
        .map_err(err)
}

fn config_from(config: &Bound<'_, PyAny>) -> PyResult<ExperimentConfig> {
    if let Ok(s) = config.cast::<PyString>() {
        return ExperimentConfig::from_toml(s.to_str()?).map_err(err);
    }
    from_py(config, false)
}

/// Cross-validate a config (TOML text or dict); one dict per result row.
#[pyfunction]
fn cross_validate<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_from(config)?;
    let rows = py
        .detach(|| run_experiment(&cfg, "python", &cfg.name, None))
        .map_err(err)?;
    to_py(py, &rows)
}

/// Qubit budgets and workload of a config, without running it.
#[pyfunction]
fn validate<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_from(config)?;
    to_py(py, &validate_config(&cfg))
}

#[pymodule]
fn dqk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStateVector>()?;
    m.add_class::<PyEncodedPoint>()?;
    m.add_class::<PySessionConfig>()?;
    m.add_class::<PyGram>()?;
    m.add_class::<PySvmModel>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_value, m)?)?;
    m.add_function(wrap_pyfunction!(swap_test_probability, m)?)?;
    m.add_function(wrap_pyfunction!(run_session, m)?)?;
    m.add_function(wrap_pyfunction!(assemble_gram, m)?)?;
    m.add_function(wrap_pyfunction!(train_svm, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
