use num_complex::Complex64 as C64;
use rand::Rng;

use super::NORM_TOL;
use crate::error::{Error, Result};

/// Largest register the simulator will allocate unless told otherwise
/// (2^26 amplitudes, 1 GiB).
pub const DEFAULT_MAX_QUBITS: usize = 26;

const ZERO: C64 = C64::new(0.0, 0.0);
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Gates used by the protocol circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    H(usize),
    X(usize),
    Z(usize),
    /// Controlled-X.
    CX {
        control: usize,
        target: usize,
    },
    /// Controlled swap of `a` and `b`.
    CSwap {
        control: usize,
        a: usize,
        b: usize,
    },
}

impl Gate {
    pub fn targets(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Z(q) => vec![q],
            Gate::CX { control, target } => vec![control, target],
            Gate::CSwap { control, a, b } => vec![control, a, b],
        }
    }
}

/// Single-qubit Pauli operators (used for noise insertion).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// 0 = I, 1 = X, 2 = Y, 3 = Z.
    pub fn from_index(i: usize) -> Pauli {
        match i & 3 {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        }
    }
}

/// Pure state of `num_qubits` qubits stored as `2^num_qubits` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// |0…0⟩ on `num_qubits` qubits, bounded by [`DEFAULT_MAX_QUBITS`].
    pub fn new(num_qubits: usize) -> Result<Self> {
        Self::with_max_qubits(num_qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn with_max_qubits(num_qubits: usize, max_qubits: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::Invalid("a state needs at least one qubit".into()));
        }
        if num_qubits > max_qubits {
            return Err(Error::Capacity {
                requested: num_qubits,
                max: max_qubits,
            });
        }
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    /// Build a state from explicit amplitudes. Length must be a power of two
    /// (at least 2) and the vector must be normalized.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Invalid(format!(
                "amplitude count {len} is not a power of two ≥ 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > DEFAULT_MAX_QUBITS {
            return Err(Error::Capacity {
                requested: num_qubits,
                max: DEFAULT_MAX_QUBITS,
            });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(StateVector { num_qubits, amps })
    }

    /// Real amplitudes, e.g. an encoded feature vector.
    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            Err(Error::QubitIndex {
                index: q,
                num_qubits: self.num_qubits,
            })
        } else {
            Ok(())
        }
    }

    fn check_distinct(&self, qs: &[usize]) -> Result<()> {
        for (k, &q) in qs.iter().enumerate() {
            self.check(q)?;
            if qs[..k].contains(&q) {
                return Err(Error::DuplicateTargets(qs.to_vec()));
            }
        }
        Ok(())
    }

    /// Apply a gate after validating its targets.
    pub fn apply(&mut self, gate: Gate) -> Result<()> {
        self.check_distinct(&gate.targets())?;
        match gate {
            Gate::H(q) => self.h(q),
            Gate::X(q) => self.x(q),
            Gate::Z(q) => self.z(q),
            Gate::CX { control, target } => self.cx(control, target),
            Gate::CSwap { control, a, b } => self.cswap(control, a, b),
        }
        Ok(())
    }

    fn h(&mut self, q: usize) {
        let m = 1usize << q;
        for base in (0..self.amps.len()).step_by(m << 1) {
            for i in base..base + m {
                let a0 = self.amps[i];
                let a1 = self.amps[i | m];
                self.amps[i] = (a0 + a1) * FRAC_1_SQRT_2;
                self.amps[i | m] = (a0 - a1) * FRAC_1_SQRT_2;
            }
        }
    }

    fn x(&mut self, q: usize) {
        let m = 1usize << q;
        for base in (0..self.amps.len()).step_by(m << 1) {
            for i in base..base + m {
                self.amps.swap(i, i | m);
            }
        }
    }

    fn y(&mut self, q: usize) {
        let m = 1usize << q;
        let i_unit = C64::new(0.0, 1.0);
        for base in (0..self.amps.len()).step_by(m << 1) {
            for i in base..base + m {
                let a0 = self.amps[i];
                let a1 = self.amps[i | m];
                self.amps[i] = -i_unit * a1;
                self.amps[i | m] = i_unit * a0;
            }
        }
    }

    fn z(&mut self, q: usize) {
        let m = 1usize << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & m != 0 {
                *a = -*a;
            }
        }
    }

    fn cx(&mut self, control: usize, target: usize) {
        let c = 1usize << control;
        let t = 1usize << target;
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
    }

    fn cswap(&mut self, control: usize, a: usize, b: usize) {
        let c = 1usize << control;
        let ma = 1usize << a;
        let mb = 1usize << b;
        for i in 0..self.amps.len() {
            // visit each |…1_a 0_b…⟩ / |…0_a 1_b…⟩ pair once
            if i & c != 0 && i & ma != 0 && i & mb == 0 {
                self.amps.swap(i, (i & !ma) | mb);
            }
        }
    }

    /// Apply a Pauli operator to qubit `q`.
    pub fn apply_pauli(&mut self, q: usize, p: Pauli) -> Result<()> {
        self.check(q)?;
        match p {
            Pauli::I => {}
            Pauli::X => self.x(q),
            Pauli::Y => self.y(q),
            Pauli::Z => self.z(q),
        }
        Ok(())
    }

    /// Load `amplitudes` into the register named by `qubits` (qubits[0] is the
    /// register's least significant bit). The register must be in |0…0⟩.
    pub fn initialize_register(&mut self, qubits: &[usize], amplitudes: &[C64]) -> Result<()> {
        self.check_distinct(qubits)?;
        if amplitudes.len() != 1 << qubits.len() {
            return Err(Error::Dimension {
                expected: 1 << qubits.len(),
                got: amplitudes.len(),
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        let reg_mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
        let stray: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & reg_mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if stray > NORM_TOL {
            return Err(Error::RegisterNotGround);
        }
        let scatter: Vec<usize> = (0..amplitudes.len())
            .map(|k| {
                qubits
                    .iter()
                    .enumerate()
                    .filter(|(bit, _)| k >> bit & 1 == 1)
                    .map(|(_, &q)| 1usize << q)
                    .sum()
            })
            .collect();
        let old = std::mem::replace(&mut self.amps, vec![ZERO; 1 << self.num_qubits]);
        for (i, a) in old.into_iter().enumerate() {
            if i & reg_mask != 0 || a == ZERO {
                continue;
            }
            for (k, &off) in scatter.iter().enumerate() {
                self.amps[i | off] = a * amplitudes[k];
            }
        }
        Ok(())
    }

    /// Σ|amplitude|² over basis states with qubit `q` equal to 0.
    pub fn prob_zero(&self, q: usize) -> Result<f64> {
        self.check(q)?;
        let m = 1usize << q;
        let p: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        Ok(p.clamp(0.0, 1.0))
    }

    /// Projective computational-basis measurement of qubit `q`.
    pub fn measure<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<u8> {
        let p0 = self.prob_zero(q)?;
        let bit = if rng.gen::<f64>() < p0 { 0u8 } else { 1u8 };
        self.collapse(q, bit, if bit == 0 { p0 } else { 1.0 - p0 });
        Ok(bit)
    }

    /// Project qubit `q` onto `bit` with known outcome probability `p`.
    fn collapse(&mut self, q: usize, bit: u8, p: f64) {
        let m = 1usize << q;
        let scale = 1.0 / p.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if ((i & m != 0) as u8) == bit {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
    }

    /// Remove measured qubits, compacting the remaining indices in order.
    pub fn discard_measured(&mut self, qubits: &[usize]) -> Result<()> {
        self.check_distinct(qubits)?;
        if qubits.len() >= self.num_qubits {
            return Err(Error::Invalid("cannot discard every qubit".into()));
        }
        let mut fixed = 0usize;
        let mut mask = 0usize;
        for &q in qubits {
            let p0 = self.prob_zero(q)?;
            let bit = if p0 >= 1.0 - NORM_TOL {
                0
            } else if p0 <= NORM_TOL {
                1
            } else {
                return Err(Error::NotMeasured(q));
            };
            mask |= 1 << q;
            fixed |= bit << q;
        }
        let keep: Vec<usize> = (0..self.num_qubits)
            .filter(|q| mask >> q & 1 == 0)
            .collect();
        let new_len = 1usize << keep.len();
        let mut amps = Vec::with_capacity(new_len);
        for k in 0..new_len {
            let mut idx = fixed;
            for (bit, &q) in keep.iter().enumerate() {
                idx |= (k >> bit & 1) << q;
            }
            amps.push(self.amps[idx]);
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        self.amps = amps;
        self.num_qubits = keep.len();
        Ok(())
    }

    /// Tensor `other` onto the high end: `other`'s qubit k becomes qubit
    /// `self.num_qubits() + k`.
    pub fn extend(&mut self, other: &StateVector, max_qubits: usize) -> Result<()> {
        let total = self.num_qubits + other.num_qubits;
        if total > max_qubits {
            return Err(Error::Capacity {
                requested: total,
                max: max_qubits,
            });
        }
        let mut amps = vec![ZERO; 1 << total];
        let low = self.amps.len();
        for (h, b) in other.amps.iter().enumerate() {
            if *b == ZERO {
                continue;
            }
            for (l, a) in self.amps.iter().enumerate() {
                amps[h * low + l] = a * b;
            }
        }
        self.amps = amps;
        self.num_qubits = total;
        Ok(())
    }

    /// ⟨self|other⟩.
    pub fn overlap(&self, other: &StateVector) -> Result<C64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::Dimension {
                expected: self.num_qubits,
                got: other.num_qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}
