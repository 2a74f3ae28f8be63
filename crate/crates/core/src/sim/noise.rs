//! Monte-Carlo depolarizing noise.
//!
//! The model is defined by its Pauli-insertion probability: after a gate on
//! k qubits, with probability p a uniformly random non-identity k-qubit
//! Pauli is applied to the gate's targets. Gates on one qubit use `p1`,
//! gates on two or more use `p2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Pauli, StateVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLevel {
    None,
    L1,
    L2,
    Custom,
}

impl NoiseLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseLevel::None => "none",
            NoiseLevel::L1 => "l1",
            NoiseLevel::L2 => "l2",
            NoiseLevel::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub level: NoiseLevel,
    pub p1: f64,
    pub p2: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            level: NoiseLevel::None,
            p1: 0.0,
            p2: 0.0,
        }
    }

    /// 0.1% error rate on one- and two-qubit gates.
    pub fn level1() -> Self {
        NoiseModel {
            level: NoiseLevel::L1,
            p1: 0.001,
            p2: 0.001,
        }
    }

    /// 1% error rate on one- and two-qubit gates.
    pub fn level2() -> Self {
        NoiseModel {
            level: NoiseLevel::L2,
            p1: 0.01,
            p2: 0.01,
        }
    }

    pub fn custom(p1: f64, p2: f64) -> Result<Self> {
        let m = NoiseModel {
            level: NoiseLevel::Custom,
            p1,
            p2,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_level(level: NoiseLevel) -> Result<Self> {
        match level {
            NoiseLevel::None => Ok(Self::none()),
            NoiseLevel::L1 => Ok(Self::level1()),
            NoiseLevel::L2 => Ok(Self::level2()),
            NoiseLevel::Custom => Err(Error::Invalid(
                "custom noise needs explicit probabilities".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.p1) || !ok(self.p2) {
            return Err(Error::Invalid(format!(
                "noise probabilities out of range: p1={}, p2={}",
                self.p1, self.p2
            )));
        }
        if self.level == NoiseLevel::None && (self.p1 != 0.0 || self.p2 != 0.0) {
            return Err(Error::Invalid(
                "noise level none requires p1 = p2 = 0".into(),
            ));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0
    }

    /// Error probability for a gate acting on `arity` qubits.
    pub fn error_probability(&self, arity: usize) -> f64 {
        match arity {
            0 => 0.0,
            1 => self.p1,
            _ => self.p2,
        }
    }
}

/// Sample the Pauli string (one per target) inserted after a gate, or `None`
/// when no error fires. A noiseless model never touches `rng`.
pub fn sample_pauli_error<R: Rng + ?Sized>(
    arity: usize,
    model: &NoiseModel,
    rng: &mut R,
) -> Option<Vec<Pauli>> {
    let p = model.error_probability(arity);
    if p == 0.0 || rng.gen::<f64>() >= p {
        return None;
    }
    let choices = 1usize << (2 * arity);
    let code = rng.gen_range(1..choices);
    Some(
        (0..arity)
            .map(|k| Pauli::from_index(code >> (2 * k)))
            .collect(),
    )
}

/// Apply one depolarizing trajectory step to `targets`. Returns whether an
/// error was inserted.
pub fn apply_pauli_noise<R: Rng + ?Sized>(
    state: &mut StateVector,
    targets: &[usize],
    model: &NoiseModel,
    rng: &mut R,
) -> Result<bool> {
    match sample_pauli_error(targets.len(), model, rng) {
        None => Ok(false),
        Some(paulis) => {
            for (&q, p) in targets.iter().zip(paulis) {
                state.apply_pauli(q, p)?;
            }
            Ok(true)
        }
    }
}
