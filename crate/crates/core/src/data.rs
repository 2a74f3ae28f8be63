//! Dataset loading, scaling, padding and stratified splitting.
//!
//! Datasets are headered CSV files with one label column; every other
//! column not dropped by the dataset's schema is a numeric feature. Rows
//! with missing, non-numeric or non-finite fields are dropped and counted.
//! Schemas for the known datasets are documented in `data/README.md`.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from, Purpose};

/// Column layout of a known dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub name: &'static str,
    pub file: &'static str,
    pub label_column: &'static str,
    pub drop_columns: &'static [&'static str],
    /// Reference (samples, features), checked with a warning only.
    pub expected_shape: (usize, usize),
}

pub const SCHEMAS: [Schema; 4] = [
    Schema {
        name: "wine",
        file: "wine.csv",
        label_column: "class",
        drop_columns: &[],
        expected_shape: (178, 13),
    },
    Schema {
        name: "parkinsons",
        file: "parkinsons.csv",
        label_column: "status",
        drop_columns: &["name"],
        expected_shape: (197, 23),
    },
    Schema {
        name: "heart",
        file: "framingham.csv",
        label_column: "TenYearCHD",
        drop_columns: &[],
        expected_shape: (4238, 15),
    },
    Schema {
        name: "digits",
        file: "digits.csv",
        label_column: "target",
        drop_columns: &[],
        expected_shape: (1797, 64),
    },
];

pub fn schema(name: &str) -> Option<&'static Schema> {
    SCHEMAS.iter().find(|s| s.name == name)
}

fn schema_for_path(path: &Path) -> Option<&'static Schema> {
    let file = path.file_name()?.to_str()?;
    let stem = path.file_stem()?.to_str()?;
    SCHEMAS.iter().find(|s| s.file == file || s.name == stem)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<Vec<f64>>,
    /// Contiguous from 0, in sorted order of the original label values.
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub provenance: String,
    pub dropped_rows: usize,
}

impl Dataset {
    /// Build from in-memory data; labels are remapped to 0..k.
    pub fn new(name: &str, features: Vec<Vec<f64>>, labels: &[i64]) -> Result<Dataset> {
        if features.len() != labels.len() {
            return Err(Error::Dimension {
                expected: features.len(),
                got: labels.len(),
            });
        }
        let width = features.first().map_or(0, Vec::len);
        if features.iter().any(|r| r.len() != width) {
            return Err(Error::Data("ragged feature rows".into()));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        let mut classes: Vec<i64> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let labels = labels
            .iter()
            .map(|l| classes.binary_search(l).unwrap())
            .collect();
        Ok(Dataset {
            name: name.to_string(),
            features,
            labels,
            feature_names: (0..width).map(|i| format!("f{i}")).collect(),
            class_names: classes.iter().map(i64::to_string).collect(),
            provenance: "in-memory".into(),
            dropped_rows: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features
            .first()
            .map_or(self.feature_names.len(), Vec::len)
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, keeping the full class list.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            provenance: self.provenance.clone(),
            dropped_rows: self.dropped_rows,
        }
    }

    /// SHA-256 over the little-endian feature values and labels.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for (row, &label) in self.features.iter().zip(&self.labels) {
            for v in row {
                h.update(v.to_le_bytes());
            }
            h.update((label as u64).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse_field(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Load a headered CSV. If the file matches a known dataset, its schema's
/// dropped columns are removed and the shape is compared to the reference.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let schema = schema_for_path(path);
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Data(format!("label column `{label_column}` not found")))?;
    let drops = schema.map_or(&[][..], |s| s.drop_columns);
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&i| i != label_idx && !drops.contains(&header[i].as_str()))
        .collect();

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = match record {
            Ok(r) if r.len() == header.len() => r,
            _ => {
                dropped += 1;
                continue;
            }
        };
        let row: Option<Vec<f64>> = feature_cols
            .iter()
            .map(|&i| parse_field(&record[i]))
            .collect();
        let label = record[label_idx].trim();
        match row {
            Some(row) if !label.is_empty() && label != "NA" => {
                features.push(row);
                raw_labels.push(label.to_string());
            }
            _ => dropped += 1,
        }
    }
    if features.is_empty() {
        return Err(Error::Data(format!("{}: no usable rows", path.display())));
    }

    let numeric: Option<Vec<f64>> = raw_labels.iter().map(|l| parse_field(l)).collect();
    let mut classes: Vec<String> = raw_labels.clone();
    match &numeric {
        Some(_) => {
            classes.sort_by(|a, b| parse_field(a).unwrap().total_cmp(&parse_field(b).unwrap()))
        }
        None => classes.sort(),
    }
    classes.dedup();
    let index: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let labels = raw_labels.iter().map(|l| index[l.as_str()]).collect();

    let name = schema.map_or_else(
        || {
            path.file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("dataset")
                .to_string()
        },
        |s| s.name.to_string(),
    );
    if dropped > 0 {
        warn!("{name}: dropped {dropped} malformed or incomplete rows");
    }
    if let Some(s) = schema {
        let shape = (features.len(), feature_cols.len());
        if shape != s.expected_shape {
            warn!(
                "{name}: loaded shape {shape:?} differs from reference {:?}",
                s.expected_shape
            );
        }
    }
    Ok(Dataset {
        name,
        features,
        labels,
        feature_names: feature_cols.iter().map(|&i| header[i].clone()).collect(),
        class_names: classes,
        provenance: path.display().to_string(),
        dropped_rows: dropped,
    })
}

/// Resolve `reference` as a known dataset name under `data_dir`, or else as
/// a CSV path whose label column is `label_column`.
pub fn load_dataset(
    reference: &str,
    data_dir: impl AsRef<Path>,
    label_column: Option<&str>,
) -> Result<Dataset> {
    let base = reference.strip_suffix("-100").unwrap_or(reference);
    if let Some(s) = schema(base) {
        let path = data_dir.as_ref().join(s.file);
        if !path.exists() {
            return Err(Error::Data(format!(
                "dataset `{}` not found at {} (see scripts/fetch_datasets.py)",
                s.name,
                path.display()
            )));
        }
        return load_csv(path, label_column.unwrap_or(s.label_column));
    }
    let path = Path::new(reference);
    if !path.exists() {
        return Err(Error::Data(format!("no such dataset file: {reference}")));
    }
    let label = match (label_column, schema_for_path(path)) {
        (Some(l), _) => l,
        (None, Some(s)) => s.label_column,
        (None, None) => "label",
    };
    load_csv(path, label)
}

/// Per-feature min-max scaling into [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Preprocessor {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Preprocessor> {
        let width = rows
            .first()
            .ok_or_else(|| Error::Data("cannot fit on zero rows".into()))?
            .len();
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for row in rows {
            if row.len() != width {
                return Err(Error::Dimension {
                    expected: width,
                    got: row.len(),
                });
            }
            for (k, &v) in row.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Ok(Preprocessor { min, max })
    }

    /// Constant training columns map to 0.5; values outside the training
    /// range are clipped.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.min.len() {
            return Err(Error::Dimension {
                expected: self.min.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let span = self.max[k] - self.min[k];
                if span > 0.0 {
                    ((v - self.min[k]) / span).clamp(0.0, 1.0)
                } else {
                    0.5
                }
            })
            .collect())
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

pub fn fit_transform(rows: &[Vec<f64>]) -> Result<(Preprocessor, Vec<Vec<f64>>)> {
    let pre = Preprocessor::fit(rows)?;
    let scaled = pre.transform_all(rows)?;
    Ok((pre, scaled))
}

/// Zero-pad `x` to `2^n` entries.
pub fn pad_features(x: &[f64], n: usize) -> Result<Vec<f64>> {
    let len = 1usize
        .checked_shl(n as u32)
        .ok_or_else(|| Error::Invalid(format!("{n} qubits")))?;
    if x.len() > len {
        return Err(Error::Dimension {
            expected: len,
            got: x.len(),
        });
    }
    let mut out = x.to_vec();
    out.resize(len, 0.0);
    Ok(out)
}

/// Indices of each class, in row order.
fn by_class(labels: &[usize]) -> Vec<Vec<usize>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    groups
}

/// Stratified random subset of `count` rows, deterministic per seed. Class
/// quotas are proportional, with remainders going to the largest fractional
/// parts (ties to the lower class).
pub fn stratified_subsample(dataset: &Dataset, count: usize, seed: u64) -> Result<Dataset> {
    let m = dataset.len();
    if count > m {
        return Err(Error::Data(format!("requested {count} samples from {m}")));
    }
    if count == m {
        return Ok(dataset.clone());
    }
    let groups = by_class(&dataset.labels);
    let exact: Vec<f64> = groups
        .iter()
        .map(|g| count as f64 * g.len() as f64 / m as f64)
        .collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = count - quota.iter().sum::<usize>();
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if quota[c] < groups[c].len() {
            quota[c] += 1;
            left -= 1;
        }
    }
    let mut chosen = Vec::with_capacity(count);
    for (c, group) in groups.iter().enumerate() {
        let mut g = group.clone();
        g.shuffle(&mut rng_from(derive_seed(
            seed,
            c as u64,
            0,
            Purpose::Subsample,
        )));
        chosen.extend_from_slice(&g[..quota[c]]);
    }
    chosen.sort_unstable();
    let mut out = dataset.subset(&chosen);
    out.name = format!("{}-{count}", dataset.name);
    Ok(out)
}

pub fn subsample_digits(dataset: &Dataset, count: usize, seed: u64) -> Result<Dataset> {
    stratified_subsample(dataset, count, seed)
}

/// Test-index sets of `k` stratified folds. Each class is shuffled and dealt
/// round-robin, continuing the deal across classes so fold sizes differ by
/// at most one.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Invalid(format!("{k} folds")));
    }
    let groups = by_class(labels);
    if let Some((c, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < k) {
        return Err(Error::Data(format!(
            "class {c} has {} members, fewer than {k} folds",
            g.len()
        )));
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (c, group) in groups.iter().enumerate() {
        let mut g = group.clone();
        g.shuffle(&mut rng_from(derive_seed(
            seed,
            c as u64,
            0,
            Purpose::Folds,
        )));
        for i in g {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
