//! Quantum feature maps: classical vectors to normalized amplitude vectors.
//!
//! Every encoding yields a real unit vector padded to a power-of-two length
//! plus a classical `norm_factor`, so that for the unnormalized maps the
//! kernel is `norm_factor(x) * norm_factor(y) * <psi_x|psi_y>`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derived_rng, Purpose};
use crate::sim::{DEFAULT_MAX_QUBITS, NORM_TOL};

/// Which feature map to apply and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureMap {
    /// Amplitude encoding; kernel `x·y`.
    Linear,
    /// d-fold tensor power of the amplitude encoding; kernel `(x·y)^d`.
    Copies { degree: u32 },
    /// Kernel `(a x·y + c)^d`.
    Poly { a: f64, c: f64, degree: u32 },
    /// Random Fourier features with Gaussian weights; kernel
    /// `exp(-|x-y|² / 2σ²)` in expectation.
    Rbf { sigma: f64, features: usize },
    /// Random Fourier features with Cauchy weights and uniform phases;
    /// kernel `exp(-|x-y|₁ / α)` in expectation.
    Laplacian { alpha: f64, features: usize },
}

impl FeatureMap {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureMap::Linear => "linear",
            FeatureMap::Copies { .. } => "copies",
            FeatureMap::Poly { .. } => "poly",
            FeatureMap::Rbf { .. } => "rbf",
            FeatureMap::Laplacian { .. } => "laplacian",
        }
    }

    pub fn is_rff(&self) -> bool {
        matches!(self, FeatureMap::Rbf { .. } | FeatureMap::Laplacian { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub map: FeatureMap,
    /// Number of classical input features.
    pub input_dim: usize,
}

fn padded_len(len: usize) -> usize {
    len.next_power_of_two().max(2)
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

impl FeatureMapSpec {
    pub fn new(map: FeatureMap, input_dim: usize) -> Result<Self> {
        let spec = FeatureMapSpec { map, input_dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear(input_dim: usize) -> Self {
        FeatureMapSpec {
            map: FeatureMap::Linear,
            input_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Encoding(msg.to_string()));
        if self.input_dim == 0 {
            return bad("input dimension must be at least 1");
        }
        match self.map {
            FeatureMap::Linear => {}
            FeatureMap::Copies { degree } => {
                if degree == 0 {
                    return bad("degree must be at least 1");
                }
            }
            FeatureMap::Poly { a, c, degree } => {
                if degree == 0 {
                    return bad("degree must be at least 1");
                }
                if a.is_nan() || a <= 0.0 {
                    return bad("a must be positive");
                }
                if c.is_nan() || c < 0.0 {
                    return bad("c must be non-negative");
                }
            }
            FeatureMap::Rbf { sigma, features } => {
                if sigma.is_nan() || sigma <= 0.0 || features == 0 {
                    return bad("rbf needs sigma > 0 and at least one feature");
                }
            }
            FeatureMap::Laplacian { alpha, features } => {
                if alpha.is_nan() || alpha <= 0.0 || features == 0 {
                    return bad("laplacian needs alpha > 0 and at least one feature");
                }
            }
        }
        let qubits = self.raw_len()?.next_power_of_two().trailing_zeros() as usize;
        if qubits > DEFAULT_MAX_QUBITS {
            return Err(Error::Capacity {
                requested: qubits,
                max: DEFAULT_MAX_QUBITS,
            });
        }
        Ok(())
    }

    /// Number of meaningful (pre-padding) components.
    fn raw_len(&self) -> Result<usize> {
        let overflow = || Error::Encoding("encoding dimension overflow".into());
        let n = self.input_dim;
        let len = match self.map {
            FeatureMap::Linear => n as u128,
            FeatureMap::Copies { degree } => {
                let base = n.next_power_of_two() as u128;
                let mut acc: u128 = 1;
                for _ in 0..degree {
                    acc = acc.checked_mul(base).ok_or_else(overflow)?;
                    if acc > 1 << 62 {
                        return Err(overflow());
                    }
                }
                acc
            }
            FeatureMap::Poly { degree, .. } => {
                binomial(n as u64 + degree as u64, degree as u64).ok_or_else(overflow)?
            }
            FeatureMap::Rbf { features, .. } | FeatureMap::Laplacian { features, .. } => {
                2 * features as u128
            }
        };
        if len > 1 << 62 {
            return Err(overflow());
        }
        Ok(len as usize)
    }

    /// Length of the encoded amplitude vector.
    pub fn encoded_len(&self) -> Result<usize> {
        Ok(padded_len(self.raw_len()?))
    }

    /// Qubits per encoded point.
    pub fn num_qubits(&self) -> Result<usize> {
        Ok(self.encoded_len()?.trailing_zeros() as usize)
    }

    /// Closed-form kernel value, the classical reference.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> f64 {
        let dot = || x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        match self.map {
            FeatureMap::Linear => dot(),
            FeatureMap::Copies { degree } => dot().powi(degree as i32),
            FeatureMap::Poly { a, c, degree } => (a * dot() + c).powi(degree as i32),
            FeatureMap::Rbf { sigma, .. } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            FeatureMap::Laplacian { alpha, .. } => {
                let d1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-d1 / alpha).exp()
            }
        }
    }
}

/// Random weights (and phases, for the Laplacian map) shared by both clients.
#[derive(Debug, Clone, PartialEq)]
pub struct RffDraw {
    /// `features` rows of `input_dim` weights, row-major.
    pub weights: Vec<f64>,
    /// Per-feature phase offsets in [0, 2π); empty for the RBF map.
    pub phases: Vec<f64>,
    pub features: usize,
    pub input_dim: usize,
}

/// Uniform in [0, 1) from the top 53 bits of a `u64`.
fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draw RFF weights for `spec` from `shared_seed`.
///
/// Gaussian weights come from Box-Muller on consecutive uniform pairs
/// (both outputs used, cosine first); Cauchy weights are
/// `tan(π(u - 1/2)) / α`; phases are `2πu`. Weights are drawn row by row,
/// then phases.
pub fn sample_rff(spec: &FeatureMapSpec, shared_seed: u64) -> Result<RffDraw> {
    let mut rng = derived_rng(shared_seed, 0, 0, Purpose::Rff);
    let n = spec.input_dim;
    match spec.map {
        FeatureMap::Rbf { sigma, features } => {
            let total = features * n;
            let mut weights = Vec::with_capacity(total + 1);
            while weights.len() < total {
                let u1 = uniform(&mut rng);
                let u2 = uniform(&mut rng);
                let r = (-2.0 * (1.0 - u1).ln()).sqrt();
                let t = 2.0 * std::f64::consts::PI * u2;
                weights.push(r * t.cos() / sigma);
                weights.push(r * t.sin() / sigma);
            }
            weights.truncate(total);
            Ok(RffDraw {
                weights,
                phases: Vec::new(),
                features,
                input_dim: n,
            })
        }
        FeatureMap::Laplacian { alpha, features } => {
            let weights = (0..features * n)
                .map(|_| (std::f64::consts::PI * (uniform(&mut rng) - 0.5)).tan() / alpha)
                .collect();
            let phases = (0..features)
                .map(|_| 2.0 * std::f64::consts::PI * uniform(&mut rng))
                .collect();
            Ok(RffDraw {
                weights,
                phases,
                features,
                input_dim: n,
            })
        }
        _ => Err(Error::Encoding(format!(
            "random Fourier features are undefined for the {} map",
            spec.map.name()
        ))),
    }
}

/// A normalized encoding and the classical norm that travels with it.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPoint {
    pub amplitudes: Vec<f64>,
    pub norm_factor: f64,
}

impl EncodedPoint {
    fn from_raw(mut raw: Vec<f64>, len: usize) -> Result<Self> {
        raw.resize(len, 0.0);
        let norm = raw.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::Encoding(
                "cannot encode a zero or non-finite vector".into(),
            ));
        }
        raw.iter_mut().for_each(|a| *a /= norm);
        Ok(EncodedPoint {
            amplitudes: raw,
            norm_factor: norm,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn overlap(&self, other: &EncodedPoint) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a * b)
            .sum()
    }
}

fn check_dim(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Encoding("non-finite input".into()));
    }
    Ok(())
}

/// Amplitude encoding: `x / |x|`, zero padded.
pub fn encode_linear(x: &[f64]) -> Result<EncodedPoint> {
    EncodedPoint::from_raw(x.to_vec(), padded_len(x.len()))
}

/// d-fold tensor power of the padded amplitude encoding. The first factor
/// occupies the least significant index digits.
pub fn encode_copies(x: &[f64], degree: u32) -> Result<EncodedPoint> {
    if degree == 0 {
        return Err(Error::Encoding("degree must be at least 1".into()));
    }
    let base = encode_linear(x)?;
    let block = x.len().next_power_of_two();
    let single = &base.amplitudes[..block];
    let mut amps = vec![1.0];
    for _ in 0..degree {
        amps = single
            .iter()
            .flat_map(|hi| amps.iter().map(move |lo| hi * lo))
            .collect();
    }
    let len = padded_len(amps.len());
    amps.resize(len, 0.0);
    Ok(EncodedPoint {
        amplitudes: amps,
        norm_factor: base.norm_factor.powi(degree as i32),
    })
}

/// Multi-indices `(k_1, …, k_{N+1})` with `Σ k = d`, lexicographically
/// decreasing.
pub fn poly_multi_indices(input_dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(slots: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            prefix.push(k);
            rec(slots - 1, remaining - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(input_dim + 1, degree, &mut Vec::new(), &mut out);
    out
}

fn multinomial(degree: u32, k: &[u32]) -> f64 {
    // d! / Π k_l!, built as a product of binomials to stay exact for small d
    let mut acc = 1.0;
    let mut used = 0u32;
    for &kl in k {
        for i in 1..=kl {
            acc *= (used + i) as f64 / i as f64;
        }
        used += kl;
    }
    debug_assert_eq!(used, degree);
    acc
}

/// Unnormalized polynomial feature vector, one component per multi-index.
///
/// Component k is `sqrt(d!/Πk!) · Π_l (√a·x_l)^{k_l} · √c^{k_{N+1}}`. The
/// scale `√a` is attached to each data factor rather than once to every
/// component: with a single global `√a` the inner product would be
/// `a·(x·y + c)^d`, which differs from `(a·x·y + c)^d` whenever `a ≠ 1`.
pub fn poly_features(x: &[f64], a: f64, c: f64, degree: u32) -> Vec<f64> {
    let sa = a.sqrt();
    let sc = c.sqrt();
    poly_multi_indices(x.len(), degree)
        .iter()
        .map(|k| {
            let mut v = multinomial(degree, k).sqrt();
            for (xl, &kl) in x.iter().zip(k) {
                v *= (sa * xl).powi(kl as i32);
            }
            v * sc.powi(k[x.len()] as i32)
        })
        .collect()
}

pub fn encode_poly(x: &[f64], a: f64, c: f64, degree: u32) -> Result<EncodedPoint> {
    let spec = FeatureMapSpec::new(FeatureMap::Poly { a, c, degree }, x.len())?;
    let raw = poly_features(x, a, c, degree);
    EncodedPoint::from_raw(raw, spec.encoded_len()?)
}

/// RFF encoding: amplitude `2j` is `cos θ_j / √D`, amplitude `2j+1` is
/// `sin θ_j / √D`, with `θ_j = w_j·x (+ phase_j)`.
pub fn encode_rff(x: &[f64], draw: &RffDraw, spec: &FeatureMapSpec) -> Result<EncodedPoint> {
    let (features, laplacian) = match spec.map {
        FeatureMap::Rbf { features, .. } => (features, false),
        FeatureMap::Laplacian { features, .. } => (features, true),
        _ => return Err(Error::Encoding("spec is not an RFF map".into())),
    };
    if draw.features != features
        || draw.input_dim != spec.input_dim
        || laplacian == draw.phases.is_empty()
    {
        return Err(Error::Encoding("RFF draw does not match the spec".into()));
    }
    check_dim(x, spec.input_dim)?;
    let scale = 1.0 / (features as f64).sqrt();
    let mut amps = vec![0.0; spec.encoded_len()?];
    for j in 0..features {
        let w = &draw.weights[j * spec.input_dim..(j + 1) * spec.input_dim];
        let mut theta: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        if laplacian {
            theta += draw.phases[j];
        }
        amps[2 * j] = theta.cos() * scale;
        amps[2 * j + 1] = theta.sin() * scale;
    }
    Ok(EncodedPoint {
        amplitudes: amps,
        norm_factor: 1.0,
    })
}

/// A feature map bound to the randomness both clients derive from their
/// shared seed.
#[derive(Debug, Clone)]
pub struct Encoder {
    spec: FeatureMapSpec,
    draw: Option<RffDraw>,
}

impl Encoder {
    pub fn new(spec: FeatureMapSpec, shared_seed: u64) -> Result<Self> {
        spec.validate()?;
        let draw = if spec.map.is_rff() {
            Some(sample_rff(&spec, shared_seed)?)
        } else {
            None
        };
        Ok(Encoder { spec, draw })
    }

    pub fn spec(&self) -> &FeatureMapSpec {
        &self.spec
    }

    pub fn encode(&self, x: &[f64]) -> Result<EncodedPoint> {
        check_dim(x, self.spec.input_dim)?;
        let point = match self.spec.map {
            FeatureMap::Linear => encode_linear(x)?,
            FeatureMap::Copies { degree } => encode_copies(x, degree)?,
            FeatureMap::Poly { a, c, degree } => encode_poly(x, a, c, degree)?,
            FeatureMap::Rbf { .. } | FeatureMap::Laplacian { .. } => {
                encode_rff(x, self.draw.as_ref().expect("rff draw"), &self.spec)?
            }
        };
        debug_assert!((point.amplitudes.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < NORM_TOL);
        Ok(point)
    }
}

/// Seeded signed permutation `x ↦ s ∘ x[π]` known only to the clients.
#[derive(Debug, Clone, PartialEq)]
pub struct Obfuscation {
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
}

impl Obfuscation {
    pub fn apply(&self, amps: &[f64]) -> Result<Vec<f64>> {
        if amps.len() != self.permutation.len() {
            return Err(Error::Dimension {
                expected: self.permutation.len(),
                got: amps.len(),
            });
        }
        Ok(self
            .permutation
            .iter()
            .zip(&self.signs)
            .map(|(&p, s)| s * amps[p])
            .collect())
    }
}

pub fn obfuscation_unitary(dim: usize, shared_seed: u64, round: u64) -> Result<Obfuscation> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::Invalid(format!(
            "dimension {dim} is not a power of two"
        )));
    }
    let mut rng = derived_rng(shared_seed, round, dim as u64, Purpose::Obfuscation);
    let mut permutation: Vec<usize> = (0..dim).collect();
    for i in (1..dim).rev() {
        let j = rng.gen_range(0..=i);
        permutation.swap(i, j);
    }
    let signs = (0..dim)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    Ok(Obfuscation { permutation, signs })
}
