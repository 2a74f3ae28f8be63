//! Stratified k-fold evaluation of a kernel pipeline.

use serde::{Deserialize, Serialize};

use super::{
    fit_kpca, gram_from_raw, psd_repair, raw_cross, raw_gram, train_svm, Convention, GramEstimate,
    GramOptions, PsdRepair, SessionStats, SourceMode, SvmParams,
};
use crate::data::{stratified_folds, stratified_subsample, Dataset, Preprocessor};
use crate::digest::config_digest;
use crate::encodings::{FeatureMap, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::protocol::TranscriptSink;
use crate::seed::{derive_seed, Purpose};
use crate::sim::NoiseLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Svm,
    /// Kernel PCA to `components` dimensions, then a linear SVM.
    KpcaSvm {
        components: usize,
    },
}

impl ModelKind {
    pub fn label(&self) -> String {
        match self {
            ModelKind::Svm => "ksvm".into(),
            ModelKind::KpcaSvm { components } => format!("{components}-kpca"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub map: FeatureMap,
    /// `session.qubits` and `seed` are set per fold.
    pub gram: GramOptions,
    pub model: ModelKind,
    pub svm: SvmParams,
    pub folds: usize,
    /// Stratified subsample to at most this many points before splitting.
    pub sample_cap: Option<usize>,
}

impl PipelineConfig {
    pub fn new(map: FeatureMap, gram: GramOptions) -> Self {
        PipelineConfig {
            map,
            gram,
            model: ModelKind::Svm,
            svm: SvmParams::default(),
            folds: 5,
            sample_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub dataset: String,
    pub samples: usize,
    pub sample_cap: Option<usize>,
    pub source: SourceMode,
    pub convention: Convention,
    pub model: ModelKind,
    pub shots: usize,
    pub noise: NoiseLevel,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub config_digest: String,
    pub seed: u64,
    pub stats: SessionStats,
    /// Total negative eigenvalue mass clipped from training Grams.
    pub clipped_mass: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn linear_gram(coords: &[Vec<f64>], against: &[Vec<f64>]) -> Vec<Vec<f64>> {
    coords
        .iter()
        .map(|a| {
            against
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect()
}

/// Accuracy of one model on one fold given its training Gram and test rows.
fn fold_accuracy(
    train: &GramEstimate,
    test_rows: &[Vec<f64>],
    train_labels: &[usize],
    test_labels: &[usize],
    cfg: &PipelineConfig,
) -> Result<f64> {
    let predictions: Vec<usize> = match cfg.model {
        ModelKind::Svm => {
            let model = train_svm(train, train_labels, &cfg.svm)?;
            test_rows
                .iter()
                .map(|r| model.predict(r))
                .collect::<Result<_>>()?
        }
        ModelKind::KpcaSvm { components } => {
            let proj = fit_kpca(train, components)?;
            let z = &proj.train_coords;
            let flat: Vec<f64> = linear_gram(z, z).into_iter().flatten().collect();
            let lin = GramEstimate::from_values(z.len(), flat)?;
            let model = train_svm(&lin, train_labels, &cfg.svm)?;
            let zt: Vec<Vec<f64>> = test_rows
                .iter()
                .map(|r| proj.transform(r))
                .collect::<Result<_>>()?;
            linear_gram(&zt, z)
                .iter()
                .map(|r| model.predict(r))
                .collect::<Result<_>>()?
        }
    };
    let correct = predictions
        .iter()
        .zip(test_labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / test_labels.len() as f64)
}

/// Cross-validate once per convention, sharing the pairwise estimates.
pub fn stratified_cv_conventions(
    dataset: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
    conventions: &[Convention],
    sink: Option<&TranscriptSink>,
) -> Result<Vec<CvReport>> {
    if conventions.is_empty() {
        return Err(Error::Invalid("no kernel convention requested".into()));
    }
    let data = match cfg.sample_cap {
        Some(cap) if dataset.len() > cap => {
            stratified_subsample(dataset, cap, derive_seed(seed, 0, 0, Purpose::Subsample))?
        }
        _ => dataset.clone(),
    };
    let folds = stratified_folds(&data.labels, cfg.folds, seed)?;
    let spec = FeatureMapSpec::new(cfg.map, data.num_features())?;

    let mut accuracies = vec![Vec::with_capacity(cfg.folds); conventions.len()];
    let mut clipped = vec![0.0; conventions.len()];
    let mut stats = SessionStats::default();
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = (0..data.len())
            .filter(|i| test_idx.binary_search(i).is_err())
            .collect();
        let train = data.subset(&train_idx);
        let test = data.subset(test_idx);
        let pre = Preprocessor::fit(&train.features)?;
        let (xs_train, xs_test) = (
            pre.transform_all(&train.features)?,
            pre.transform_all(&test.features)?,
        );

        let mut opts = cfg.gram;
        opts.seed = derive_seed(seed, f as u64, 0, Purpose::Session);
        if opts.source == SourceMode::Protocol {
            opts.session.qubits = spec.num_qubits()?;
        }
        let raw_train = raw_gram(&xs_train, &spec, &opts, sink)?;
        let raw_test = raw_cross(&xs_test, &xs_train, &spec, &opts, sink)?;
        stats.merge(&raw_train.stats);
        stats.merge(&raw_test.stats);

        for (c, &convention) in conventions.iter().enumerate() {
            opts.convention = convention;
            let gram = psd_repair(&gram_from_raw(&raw_train, &opts));
            if let PsdRepair::Clipped { clipped_mass } = gram.repair {
                clipped[c] += clipped_mass;
            }
            let rows: Vec<Vec<f64>> = raw_test
                .kernel(opts.source, convention)
                .chunks(xs_train.len())
                .map(<[f64]>::to_vec)
                .collect();
            accuracies[c].push(fold_accuracy(
                &gram,
                &rows,
                &train.labels,
                &test.labels,
                cfg,
            )?);
        }
    }

    Ok(conventions
        .iter()
        .zip(accuracies)
        .zip(clipped)
        .map(|((&convention, fold_accuracies), clipped_mass)| {
            let (mean, std) = mean_std(&fold_accuracies);
            let mut cfg = *cfg;
            cfg.gram.convention = convention;
            CvReport {
                dataset: data.name.clone(),
                samples: data.len(),
                sample_cap: cfg.sample_cap,
                source: cfg.gram.source,
                convention,
                model: cfg.model,
                shots: if cfg.gram.source == SourceMode::Protocol {
                    cfg.gram.session.shots * cfg.gram.session.repetitions
                } else {
                    0
                },
                noise: cfg.gram.session.noise.level,
                fold_accuracies,
                mean,
                std,
                config_digest: config_digest(&(&cfg, &dataset.name, seed)),
                seed,
                stats,
                clipped_mass,
            }
        })
        .collect())
}

pub fn stratified_cv(
    dataset: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
    sink: Option<&TranscriptSink>,
) -> Result<CvReport> {
    Ok(stratified_cv_conventions(dataset, cfg, seed, &[cfg.gram.convention], sink)?.remove(0))
}
