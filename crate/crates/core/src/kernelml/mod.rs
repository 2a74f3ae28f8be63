//! Gram matrices from pairwise overlaps, and kernel models trained on them.
//!
//! Overlaps come from one of three sources: the closed-form kernel, the
//! exact overlap of the encoded states, or the swap-test estimate of a
//! protocol session. The swap test returns `|<a|b>|²`, so for data scaled
//! into `[0, 1]` (nonnegative overlaps) the kernel is recovered as
//! `sqrt(clip(estimate, 0, 1))` times the two norm factors.

mod cv;
mod kpca;
mod svm;

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encodings::{EncodedPoint, Encoder, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::protocol::{run_decoy_session, run_session_encoded, SessionConfig, TranscriptSink};
use crate::seed::{derive_seed, Purpose};
use crate::sim::{NoiseLevel, StateVector};

pub use cv::{stratified_cv, stratified_cv_conventions, CvReport, ModelKind, PipelineConfig};
pub use kpca::{fit_kpca, KpcaProjection};
pub use svm::{train_svm, BinarySvm, SvmModel, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    ExactClassical,
    ExactQuantum,
    Protocol,
}

impl SourceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceMode::ExactClassical => "exact_classical",
            SourceMode::ExactQuantum => "exact_quantum",
            SourceMode::Protocol => "protocol",
        }
    }
}

/// How a fidelity `F = |<a|b>|²` becomes a kernel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `sqrt(F)` rescaled by both norm factors.
    SqrtFidelity,
    /// `F` itself, unit diagonal.
    Fidelity,
}

impl Convention {
    pub fn as_str(&self) -> &'static str {
        match self {
            Convention::SqrtFidelity => "sqrt_fidelity",
            Convention::Fidelity => "fidelity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsdRepair {
    None,
    Clipped { clipped_mass: f64 },
}

/// Session bookkeeping gathered while assembling a Gram block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStats {
    pub sessions: usize,
    pub decoy_sessions: usize,
    pub decoy_failures: usize,
    /// Estimates below 0 that were clipped before the square root.
    pub negative_estimates: usize,
}

impl SessionStats {
    pub fn merge(&mut self, other: &SessionStats) {
        self.sessions += other.sessions;
        self.decoy_sessions += other.decoy_sessions;
        self.decoy_failures += other.decoy_failures;
        self.negative_estimates += other.negative_estimates;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramEstimate {
    pub size: usize,
    /// Row-major `size × size`.
    pub values: Vec<f64>,
    pub source: SourceMode,
    pub convention: Convention,
    pub shots: usize,
    pub noise: NoiseLevel,
    pub repair: PsdRepair,
    pub stats: SessionStats,
}

impl GramEstimate {
    pub fn from_values(size: usize, values: Vec<f64>) -> Result<GramEstimate> {
        if values.len() != size * size {
            return Err(Error::Dimension {
                expected: size * size,
                got: values.len(),
            });
        }
        Ok(GramEstimate {
            size,
            values,
            source: SourceMode::ExactClassical,
            convention: Convention::SqrtFidelity,
            shots: 0,
            noise: NoiseLevel::None,
            repair: PsdRepair::None,
            stats: SessionStats::default(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.size, self.size, &self.values)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.size == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.to_matrix())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.size {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Headered CSV with `#`-prefixed metadata lines.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let repair = match self.repair {
            PsdRepair::None => "none".to_string(),
            PsdRepair::Clipped { clipped_mass } => format!("clipped:{clipped_mass:e}"),
        };
        writeln!(
            out,
            "# source={} convention={} shots={} noise={} repair={}",
            self.source.as_str(),
            self.convention.as_str(),
            self.shots,
            self.noise.as_str(),
            repair
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record((0..self.size).map(|j| format!("k{j}")))?;
        for i in 0..self.size {
            w.write_record(self.row(i).iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv(input: impl std::io::Read) -> Result<GramEstimate> {
        let mut reader = BufReader::new(input);
        let mut meta = String::new();
        reader.read_line(&mut meta)?;
        let mut gram = GramEstimate::from_values(0, Vec::new())?;
        for field in meta.trim_start_matches('#').split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Data(format!("bad gram metadata `{field}`")))?;
            match key {
                "source" => gram.source = parse_tag(value)?,
                "convention" => gram.convention = parse_tag(value)?,
                "shots" => {
                    gram.shots = value
                        .parse()
                        .map_err(|_| Error::Data(format!("bad shots `{value}`")))?
                }
                "noise" => gram.noise = parse_tag(value)?,
                "repair" => {
                    gram.repair = match value.strip_prefix("clipped:") {
                        Some(m) => PsdRepair::Clipped {
                            clipped_mass: m
                                .parse()
                                .map_err(|_| Error::Data(format!("bad repair `{value}`")))?,
                        },
                        None => PsdRepair::None,
                    }
                }
                _ => {}
            }
        }
        let mut rows = csv::Reader::from_reader(reader);
        let size = rows.headers()?.len();
        let mut values = Vec::with_capacity(size * size);
        for record in rows.records() {
            let record = record?;
            for v in record.iter() {
                values.push(
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Data(format!("bad gram entry `{v}`")))?,
                );
            }
        }
        if values.len() != size * size {
            return Err(Error::Data(format!(
                "gram has {} entries, expected {}",
                values.len(),
                size * size
            )));
        }
        gram.size = size;
        gram.values = values;
        Ok(gram)
    }

    pub fn load_csv(path: &Path) -> Result<GramEstimate> {
        GramEstimate::read_csv(std::fs::File::open(path)?)
    }
}

fn parse_tag<T: serde::de::DeserializeOwned>(v: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(v.into()))
        .map_err(|e| Error::Data(format!("bad gram metadata `{v}`: {e}")))
}

/// Everything needed to turn points into kernel values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramOptions {
    pub source: SourceMode,
    pub convention: Convention,
    /// Used in protocol mode; `qubits` must match the feature map.
    pub session: SessionConfig,
    /// Master seed for per-pair session seeds.
    pub seed: u64,
    /// Run a decoy session after every `decoy_interval` protocol sessions
    /// (0 disables decoys).
    pub decoy_interval: usize,
}

impl GramOptions {
    pub fn exact(source: SourceMode) -> GramOptions {
        GramOptions {
            source,
            convention: Convention::SqrtFidelity,
            session: SessionConfig::new(1, 1),
            seed: 0,
            decoy_interval: 0,
        }
    }

    pub fn protocol(session: SessionConfig, seed: u64) -> GramOptions {
        GramOptions {
            source: SourceMode::Protocol,
            convention: Convention::SqrtFidelity,
            session,
            seed,
            decoy_interval: 0,
        }
    }
}

/// Raw pairwise quantities from which either convention is derived.
#[derive(Debug, Clone)]
pub(crate) struct RawBlock {
    rows: usize,
    cols: usize,
    /// Closed-form kernel values (classical) or clipped fidelities.
    values: Vec<f64>,
    row_norms: Vec<f64>,
    col_norms: Vec<f64>,
    symmetric: bool,
    pub(crate) stats: SessionStats,
}

impl RawBlock {
    pub(crate) fn kernel(&self, source: SourceMode, convention: Convention) -> Vec<f64> {
        if source == SourceMode::ExactClassical {
            return self.values.clone();
        }
        let mut out = vec![0.0; self.values.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let f = self.values[i * self.cols + j];
                out[i * self.cols + j] = match convention {
                    Convention::SqrtFidelity => f.sqrt() * self.row_norms[i] * self.col_norms[j],
                    Convention::Fidelity => f,
                };
            }
        }
        out
    }
}

fn encode_all(encoder: &Encoder, points: &[Vec<f64>]) -> Result<Vec<EncodedPoint>> {
    points.iter().map(|x| encoder.encode(x)).collect()
}

struct PairResult {
    value: f64,
    stats: SessionStats,
    transcript: Option<crate::protocol::ProtocolTranscript>,
}

/// Kernel quantities for the listed `(i, j)` pairs. `block` separates the
/// seed and session-id space of different blocks over the same master seed.
#[allow(clippy::too_many_arguments)]
fn pair_values(
    pairs: &[(usize, usize)],
    rows: &[Vec<f64>],
    cols: &[Vec<f64>],
    enc_rows: &[EncodedPoint],
    enc_cols: &[EncodedPoint],
    spec: &FeatureMapSpec,
    opts: &GramOptions,
    block: u64,
    sink: Option<&TranscriptSink>,
) -> Result<(Vec<f64>, SessionStats)> {
    let master = derive_seed(opts.seed, block, 0, Purpose::Session);
    let width = cols.len() as u64;
    let states = |enc: &[EncodedPoint]| -> Result<Vec<StateVector>> {
        enc.iter()
            .map(|e| StateVector::from_real(&e.amplitudes))
            .collect()
    };
    let (sv_rows, sv_cols) = if opts.source == SourceMode::ExactQuantum {
        (states(enc_rows)?, states(enc_cols)?)
    } else {
        (Vec::new(), Vec::new())
    };
    let one = |(i, j): (usize, usize)| -> Result<PairResult> {
        let mut stats = SessionStats::default();
        let (value, transcript) = match opts.source {
            SourceMode::ExactClassical => (spec.kernel(&rows[i], &cols[j]), None),
            SourceMode::ExactQuantum => {
                (sv_rows[i].overlap(&sv_cols[j])?.norm_sqr().min(1.0), None)
            }
            SourceMode::Protocol => {
                let session_id = (block << 40) | (i as u64 * width + j as u64);
                let seed = derive_seed(master, i as u64, j as u64, Purpose::Session);
                let t = run_session_encoded(
                    &enc_rows[i],
                    &enc_cols[j],
                    &opts.session,
                    session_id,
                    seed,
                )?;
                stats.sessions = 1;
                if t.estimate < 0.0 {
                    stats.negative_estimates = 1;
                }
                if opts.decoy_interval > 0
                    && (i as u64 * width + j as u64).is_multiple_of(opts.decoy_interval as u64)
                {
                    let decoy_seed = derive_seed(master, i as u64, j as u64, Purpose::Decoy);
                    let d = run_decoy_session(&opts.session, session_id, decoy_seed)?;
                    stats.decoy_sessions = 1;
                    stats.decoy_failures = !d.passed as usize;
                }
                (t.estimate.clamp(0.0, 1.0), sink.map(|_| t))
            }
        };
        Ok(PairResult {
            value,
            stats,
            transcript,
        })
    };

    let mut values = Vec::with_capacity(pairs.len());
    let mut stats = SessionStats::default();
    // chunks bound the memory held by transcripts awaiting the sink
    for chunk in pairs.chunks(4096) {
        let results: Vec<PairResult> = chunk.par_iter().map(|&p| one(p)).collect::<Result<_>>()?;
        for r in results {
            values.push(r.value);
            stats.merge(&r.stats);
            if let (Some(s), Some(t)) = (sink, &r.transcript) {
                s.append(t)?;
            }
        }
    }
    Ok((values, stats))
}

fn check_points(points: &[Vec<f64>], spec: &FeatureMapSpec) -> Result<()> {
    if let Some(p) = points.iter().find(|p| p.len() != spec.input_dim) {
        return Err(Error::Dimension {
            expected: spec.input_dim,
            got: p.len(),
        });
    }
    Ok(())
}

fn session_for(spec: &FeatureMapSpec, opts: &GramOptions) -> Result<GramOptions> {
    let opts = *opts;
    if opts.source == SourceMode::Protocol {
        let n = spec.num_qubits()?;
        if opts.session.qubits != n {
            return Err(Error::Dimension {
                expected: n,
                got: opts.session.qubits,
            });
        }
        opts.session.validate()?;
    }
    Ok(opts)
}

pub(crate) fn raw_gram(
    points: &[Vec<f64>],
    spec: &FeatureMapSpec,
    opts: &GramOptions,
    sink: Option<&TranscriptSink>,
) -> Result<RawBlock> {
    check_points(points, spec)?;
    let opts = session_for(spec, opts)?;
    let encoder = Encoder::new(*spec, opts.session.shared_seed)?;
    let enc = encode_all(&encoder, points)?;
    let m = points.len();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect();
    let (upper, stats) = pair_values(&pairs, points, points, &enc, &enc, spec, &opts, 0, sink)?;
    let mut values = vec![0.0; m * m];
    for (&(i, j), &v) in pairs.iter().zip(&upper) {
        values[i * m + j] = v;
        values[j * m + i] = v;
    }
    for i in 0..m {
        values[i * m + i] = match opts.source {
            SourceMode::ExactClassical => spec.kernel(&points[i], &points[i]),
            _ => 1.0,
        };
    }
    let norms: Vec<f64> = enc.iter().map(|e| e.norm_factor).collect();
    Ok(RawBlock {
        rows: m,
        cols: m,
        values,
        row_norms: norms.clone(),
        col_norms: norms,
        symmetric: true,
        stats,
    })
}

pub(crate) fn raw_cross(
    rows: &[Vec<f64>],
    cols: &[Vec<f64>],
    spec: &FeatureMapSpec,
    opts: &GramOptions,
    sink: Option<&TranscriptSink>,
) -> Result<RawBlock> {
    check_points(rows, spec)?;
    check_points(cols, spec)?;
    let opts = session_for(spec, opts)?;
    let encoder = Encoder::new(*spec, opts.session.shared_seed)?;
    let (er, ec) = (encode_all(&encoder, rows)?, encode_all(&encoder, cols)?);
    let pairs: Vec<(usize, usize)> = (0..rows.len())
        .flat_map(|i| (0..cols.len()).map(move |j| (i, j)))
        .collect();
    let (values, stats) = pair_values(&pairs, rows, cols, &er, &ec, spec, &opts, 1, sink)?;
    Ok(RawBlock {
        rows: rows.len(),
        cols: cols.len(),
        values,
        row_norms: er.iter().map(|e| e.norm_factor).collect(),
        col_norms: ec.iter().map(|e| e.norm_factor).collect(),
        symmetric: false,
        stats,
    })
}

pub(crate) fn gram_from_raw(raw: &RawBlock, opts: &GramOptions) -> GramEstimate {
    debug_assert!(raw.symmetric);
    GramEstimate {
        size: raw.rows,
        values: raw.kernel(opts.source, opts.convention),
        source: opts.source,
        convention: opts.convention,
        shots: if opts.source == SourceMode::Protocol {
            opts.session.shots * opts.session.repetitions
        } else {
            0
        },
        noise: opts.session.noise.level,
        repair: PsdRepair::None,
        stats: raw.stats,
    }
}

/// Symmetric Gram matrix over `points` with an analytic diagonal.
pub fn assemble_gram(
    points: &[Vec<f64>],
    spec: &FeatureMapSpec,
    opts: &GramOptions,
    sink: Option<&TranscriptSink>,
) -> Result<GramEstimate> {
    let raw = raw_gram(points, spec, opts, sink)?;
    Ok(gram_from_raw(&raw, opts))
}

/// Kernel rows of `rows` against `cols` (e.g. test points against the
/// training set), one `Vec` per row.
pub fn cross_kernel(
    rows: &[Vec<f64>],
    cols: &[Vec<f64>],
    spec: &FeatureMapSpec,
    opts: &GramOptions,
    sink: Option<&TranscriptSink>,
) -> Result<Vec<Vec<f64>>> {
    let raw = raw_cross(rows, cols, spec, opts, sink)?;
    Ok(raw
        .kernel(opts.source, opts.convention)
        .chunks(raw.cols.max(1))
        .map(<[f64]>::to_vec)
        .collect())
}

/// Nearest positive semidefinite matrix by eigenvalue clipping, with the
/// original diagonal restored by the congruence `D K D` (which keeps the
/// result PSD). Already-PSD input is returned unchanged.
pub fn psd_repair(gram: &GramEstimate) -> GramEstimate {
    let m = gram.size;
    let mut out = gram.clone();
    if m == 0 {
        return out;
    }
    let mut sym = gram.to_matrix();
    sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let clipped_mass: f64 = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l < 0.0)
        .map(|l| -l)
        .sum();
    if clipped_mass == 0.0 {
        out.values = sym.transpose().as_slice().to_vec();
        out.repair = PsdRepair::Clipped { clipped_mass: 0.0 };
        return out;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let scale: Vec<f64> = (0..m)
        .map(|i| {
            let (target, got) = (gram.get(i, i), rebuilt[(i, i)]);
            if got > 1e-300 && target > 0.0 {
                (target / got).sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut values = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            values[i * m + j] = scale[i] * rebuilt[(i, j)] * scale[j];
        }
    }
    out.values = values;
    out.repair = PsdRepair::Clipped { clipped_mass };
    out
}
