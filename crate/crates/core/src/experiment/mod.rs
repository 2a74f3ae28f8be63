//! Config-driven experiment runs and the named result suites.
//!
//! A run loads a dataset, cross-validates one pipeline and returns one
//! result row per kernel convention. Rows carry the config digest and
//! master seed. Wall-clock times go to a separate timings file.

mod suite;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, subsample_digits, Dataset};
use crate::digest::config_digest;
use crate::encodings::{FeatureMap, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::kernelml::{
    stratified_cv_conventions, Convention, CvReport, GramOptions, ModelKind, PipelineConfig,
    SourceMode, SvmParams,
};
use crate::protocol::{required_qubits, ExecutionMode, SessionConfig, ShotEngine, TranscriptSink};
use crate::seed::{derive_seed, Purpose};
use crate::sim::{NoiseLevel, NoiseModel, DEFAULT_MAX_QUBITS};

pub use suite::{run_suite, suite_cells, Cell, SuiteOptions, SuiteSummary, SUITES};

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}
fn default_kernel() -> FeatureMap {
    FeatureMap::Linear
}
fn default_shots() -> usize {
    1024
}
fn default_folds() -> usize {
    5
}
fn default_model() -> ModelKind {
    ModelKind::Svm
}
fn default_c() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-3
}
fn default_passes() -> usize {
    200
}
fn default_conventions() -> Vec<Convention> {
    vec![Convention::SqrtFidelity, Convention::Fidelity]
}
fn default_one() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_noise() -> NoiseLevel {
    NoiseLevel::None
}
fn default_max_qubits() -> usize {
    DEFAULT_MAX_QUBITS
}

/// Everything that determines a run. Keys mirror the TOML file; see
/// `configs/` for examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Known dataset name (`wine`, `parkinsons`, `heart`, `digits`) or a
    /// CSV path.
    pub dataset: String,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default)]
    pub label_column: Option<String>,
    /// Stratified subset size taken before cross-validation. A dataset
    /// name like `digits-100` implies one.
    #[serde(default)]
    pub subsample: Option<usize>,
    #[serde(default = "default_kernel")]
    pub kernel: FeatureMap,
    pub mode: SourceMode,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default = "default_noise")]
    pub noise: NoiseLevel,
    /// Error rates for `noise = "custom"`.
    #[serde(default)]
    pub p1: Option<f64>,
    #[serde(default)]
    pub p2: Option<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_passes")]
    pub max_passes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub shared_seed: u64,
    #[serde(default)]
    pub sample_cap: Option<usize>,
    #[serde(default = "default_conventions")]
    pub conventions: Vec<Convention>,
    #[serde(default)]
    pub decoy_interval: usize,
    #[serde(default = "default_one")]
    pub repetitions: usize,
    #[serde(default)]
    pub execution: ExecutionMode,
    #[serde(default)]
    pub engine: ShotEngine,
    #[serde(default)]
    pub adversary: bool,
    #[serde(default = "default_true")]
    pub obfuscate: bool,
    #[serde(default = "default_max_qubits")]
    pub max_qubits: usize,
    #[serde(default = "default_true")]
    pub transcripts: bool,
}

impl ExperimentConfig {
    pub fn new(name: &str, dataset: &str, mode: SourceMode) -> Self {
        ExperimentConfig {
            name: name.to_string(),
            dataset: dataset.to_string(),
            data_dir: default_data_dir(),
            label_column: None,
            subsample: None,
            kernel: default_kernel(),
            mode,
            shots: default_shots(),
            noise: NoiseLevel::None,
            p1: None,
            p2: None,
            folds: default_folds(),
            model: ModelKind::Svm,
            c: default_c(),
            tol: default_tol(),
            max_passes: default_passes(),
            seed: 0,
            shared_seed: 0,
            sample_cap: None,
            conventions: default_conventions(),
            decoy_interval: 0,
            repetitions: 1,
            execution: ExecutionMode::Streaming,
            engine: ShotEngine::Channel,
            adversary: false,
            obfuscate: true,
            max_qubits: DEFAULT_MAX_QUBITS,
            transcripts: true,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        match self.noise {
            NoiseLevel::Custom => match (self.p1, self.p2) {
                (Some(p1), Some(p2)) => NoiseModel::custom(p1, p2),
                _ => Err(Error::Invalid("custom noise needs p1 and p2".into())),
            },
            level => NoiseModel::from_level(level),
        }
    }

    /// Digest of everything except the display name and data directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.name = String::new();
        c.data_dir = PathBuf::new();
        c.transcripts = false;
        config_digest(&c)
    }

    pub fn session(&self, qubits: usize) -> Result<SessionConfig> {
        let mut s = SessionConfig::new(qubits, self.shots);
        s.noise = self.noise_model()?;
        s.shared_seed = self.shared_seed;
        s.mode = self.execution;
        s.adversary = self.adversary;
        s.obfuscate = self.obfuscate;
        s.repetitions = self.repetitions;
        s.engine = self.engine;
        s.max_qubits = self.max_qubits;
        Ok(s)
    }

    pub fn pipeline(&self, qubits: usize) -> Result<PipelineConfig> {
        let gram = GramOptions {
            source: self.mode,
            convention: self
                .conventions
                .first()
                .copied()
                .unwrap_or(Convention::SqrtFidelity),
            session: self.session(qubits)?,
            seed: self.seed,
            decoy_interval: self.decoy_interval,
        };
        Ok(PipelineConfig {
            map: self.kernel,
            gram,
            model: self.model,
            svm: SvmParams {
                c: self.c,
                tol: self.tol,
                max_passes: self.max_passes,
            },
            folds: self.folds,
            sample_cap: self.sample_cap,
        })
    }

    /// The dataset after the optional stratified subset.
    pub fn load_data(&self) -> Result<Dataset> {
        let ds = load_dataset(&self.dataset, &self.data_dir, self.label_column.as_deref())?;
        let implied = self
            .dataset
            .rsplit_once('-')
            .and_then(|(_, n)| n.parse::<usize>().ok());
        match self.subsample.or(implied) {
            Some(count) => {
                subsample_digits(&ds, count, derive_seed(self.seed, 0, 1, Purpose::Subsample))
            }
            None => Ok(ds),
        }
    }
}

/// One output row; serialized as a CSV record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub suite: String,
    pub cell: String,
    pub dataset: String,
    pub method: String,
    pub kernel: String,
    pub mode: String,
    pub convention: String,
    pub shots: usize,
    pub noise: String,
    pub folds: usize,
    pub samples: usize,
    pub sample_cap: Option<usize>,
    pub mean: f64,
    pub std: f64,
    /// Semicolon-separated per-fold accuracies.
    pub fold_accuracies: String,
    pub seed: u64,
    pub config_digest: String,
    pub sessions: usize,
    pub decoy_sessions: usize,
    pub decoy_failures: usize,
    pub negative_estimates: usize,
    pub clipped_mass: f64,
}

impl ResultRow {
    fn from_report(suite: &str, cell: &str, cfg: &ExperimentConfig, r: &CvReport) -> Self {
        ResultRow {
            suite: suite.to_string(),
            cell: cell.to_string(),
            dataset: r.dataset.clone(),
            method: r.model.label(),
            kernel: cfg.kernel.name().to_string(),
            mode: r.source.as_str().to_string(),
            convention: if r.source == SourceMode::ExactClassical {
                "closed_form".to_string()
            } else {
                r.convention.as_str().to_string()
            },
            shots: r.shots,
            noise: if r.source == SourceMode::Protocol {
                r.noise.as_str().to_string()
            } else {
                "none".to_string()
            },
            folds: r.fold_accuracies.len(),
            samples: r.samples,
            sample_cap: r.sample_cap,
            mean: round6(r.mean),
            std: round6(r.std),
            fold_accuracies: r
                .fold_accuracies
                .iter()
                .map(|a| format!("{a:.6}"))
                .collect::<Vec<_>>()
                .join(";"),
            seed: cfg.seed,
            config_digest: cfg.digest(),
            sessions: r.stats.sessions,
            decoy_sessions: r.stats.decoy_sessions,
            decoy_failures: r.stats.decoy_failures,
            negative_estimates: r.stats.negative_estimates,
            clipped_mass: round6(r.clipped_mass),
        }
    }
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Structured failure record, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub cell: String,
    pub config_digest: String,
    pub kind: String,
    pub message: String,
}

impl ErrorRecord {
    pub fn new(cell: &str, digest: &str, err: &Error) -> Self {
        let kind = format!("{err:?}");
        ErrorRecord {
            cell: cell.to_string(),
            config_digest: digest.to_string(),
            kind: kind
                .split(|c: char| !c.is_alphanumeric())
                .next()
                .unwrap_or("Error")
                .to_string(),
            message: err.to_string(),
        }
    }
}

/// Serialize rows as CSV text, with a header when `header` is set.
pub fn rows_to_csv(rows: &[ResultRow], header: bool) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header)
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() && header {
        return Ok(RESULT_HEADER.as_bytes().to_vec());
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

const RESULT_HEADER: &str = "suite,cell,dataset,method,kernel,mode,convention,shots,noise,folds,samples,sample_cap,mean,std,fold_accuracies,seed,config_digest,sessions,decoy_sessions,decoy_failures,negative_estimates,clipped_mass\n";

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Append `rows` to a results file with one write, adding the header to a
/// new file.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
    let bytes = rows_to_csv(rows, fresh)?;
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(format!("{line}\n").as_bytes())?;
    Ok(())
}

/// Run one experiment. Rows are returned, not written; transcripts (for
/// protocol runs with `transcripts` set) go to `transcript_path`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    suite: &str,
    cell: &str,
    transcript_path: Option<&Path>,
) -> Result<Vec<ResultRow>> {
    let data = cfg.load_data()?;
    let spec = FeatureMapSpec::new(cfg.kernel, data.num_features())?;
    let pipeline = cfg.pipeline(spec.num_qubits()?)?;
    if cfg.mode == SourceMode::Protocol {
        pipeline.gram.session.validate()?;
    }
    let sink = match (cfg.mode, cfg.transcripts, transcript_path) {
        (SourceMode::Protocol, true, Some(p)) => {
            if let Some(dir) = p.parent() {
                fs::create_dir_all(dir)?;
            }
            Some(TranscriptSink::create(p)?)
        }
        _ => None,
    };
    let conventions = if cfg.mode == SourceMode::ExactClassical {
        vec![Convention::SqrtFidelity]
    } else {
        cfg.conventions.clone()
    };
    let reports =
        stratified_cv_conventions(&data, &pipeline, cfg.seed, &conventions, sink.as_ref())?;
    if let Some(s) = &sink {
        s.flush()?;
    }
    Ok(reports
        .iter()
        .map(|r| ResultRow::from_report(suite, cell, cfg, r))
        .collect())
}

/// Run, append rows to `out/results.csv` and the wall time to
/// `out/timings.csv`.
pub fn run_to_dir(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ResultRow>> {
    fs::create_dir_all(out)?;
    let cell = if cfg.name.is_empty() {
        "run"
    } else {
        &cfg.name
    };
    let start = Instant::now();
    let transcript = out.join("transcripts").join(format!("{cell}.jsonl"));
    let rows = run_experiment(cfg, "run", cell, Some(&transcript))?;
    append_rows(&out.join("results.csv"), &rows)?;
    append_timing(
        &out.join("timings.csv"),
        cell,
        &cfg.digest(),
        start.elapsed().as_secs_f64(),
    )?;
    Ok(rows)
}

pub(crate) fn append_timing(path: &Path, cell: &str, digest: &str, secs: f64) -> Result<()> {
    if !path.exists() {
        append_line(path, "cell,config_digest,wall_seconds")?;
    }
    append_line(path, &format!("{cell},{digest},{secs:.3}"))
}

/// Qubit budgets and workload of a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config_digest: String,
    pub features: Option<usize>,
    pub samples: Option<usize>,
    pub qubits_per_point: Option<usize>,
    pub streaming_qubits: Option<usize>,
    pub full_circuit_qubits: Option<usize>,
    pub capacity: usize,
    pub streaming_ok: bool,
    pub full_circuit_ok: bool,
    /// Sessions for one Gram matrix over all samples, `m(m−1)/2`.
    pub pairs: Option<u64>,
    /// Sessions actually run by cross-validation (train and test blocks).
    pub cv_sessions: Option<u64>,
    pub shot_total: Option<u64>,
    pub accepted: bool,
    pub notes: Vec<String>,
}

/// Feasibility for a dataset of `samples × features` without loading it.
pub fn validate_shape(cfg: &ExperimentConfig, samples: usize, features: usize) -> ValidationReport {
    let mut notes = Vec::new();
    let mut report = ValidationReport {
        config_digest: cfg.digest(),
        features: Some(features),
        samples: Some(samples),
        qubits_per_point: None,
        streaming_qubits: None,
        full_circuit_qubits: None,
        capacity: cfg.max_qubits,
        streaming_ok: false,
        full_circuit_ok: false,
        pairs: None,
        cv_sessions: None,
        shot_total: None,
        accepted: false,
        notes: Vec::new(),
    };
    let n = match FeatureMapSpec::new(cfg.kernel, features).and_then(|s| s.num_qubits()) {
        Ok(n) => n,
        Err(e) => {
            notes.push(format!("feature map rejected: {e}"));
            report.notes = notes;
            return report;
        }
    };
    let (stream, full) = (
        required_qubits(n, ExecutionMode::Streaming),
        required_qubits(n, ExecutionMode::FullCircuit),
    );
    report.qubits_per_point = Some(n);
    report.streaming_qubits = Some(stream);
    report.full_circuit_qubits = Some(full);
    report.streaming_ok = stream <= cfg.max_qubits;
    report.full_circuit_ok = full <= cfg.max_qubits;

    let m = cfg.sample_cap.map_or(samples, |c| c.min(samples)) as u64;
    report.pairs = Some(m * m.saturating_sub(1) / 2);
    let k = cfg.folds.max(1) as u64;
    let cv: u64 = (0..k)
        .map(|f| {
            let test = m / k + u64::from(f < m % k);
            let train = m - test;
            train * train.saturating_sub(1) / 2 + test * train
        })
        .sum();
    let protocol = cfg.mode == SourceMode::Protocol;
    report.cv_sessions = protocol.then_some(cv);
    report.shot_total = protocol.then_some(cv * cfg.shots as u64 * cfg.repetitions as u64);

    let selected_ok = match cfg.execution {
        ExecutionMode::Streaming => report.streaming_ok,
        ExecutionMode::FullCircuit => report.full_circuit_ok,
    };
    if protocol && !selected_ok {
        notes.push(format!(
            "refused: {:?} needs {} qubits, capacity {}",
            cfg.execution,
            if cfg.execution == ExecutionMode::Streaming {
                stream
            } else {
                full
            },
            cfg.max_qubits
        ));
    }
    if let Err(e) = cfg.noise_model() {
        notes.push(e.to_string());
    }
    report.accepted = notes.is_empty() && (!protocol || selected_ok);
    report.notes = notes;
    report
}

/// Feasibility report; loads the dataset to learn its shape when it can.
pub fn validate(cfg: &ExperimentConfig) -> ValidationReport {
    match cfg.load_data() {
        Ok(ds) => validate_shape(cfg, ds.len(), ds.num_features()),
        Err(e) => {
            let mut r = validate_shape(cfg, 0, 1);
            r.samples = None;
            r.features = None;
            r.qubits_per_point = None;
            r.streaming_qubits = None;
            r.full_circuit_qubits = None;
            r.pairs = None;
            r.cv_sessions = None;
            r.shot_total = None;
            r.accepted = false;
            r.notes = vec![format!("dataset unavailable: {e}")];
            r
        }
    }
}
