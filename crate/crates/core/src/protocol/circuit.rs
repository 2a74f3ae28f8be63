//! Label-addressed circuit execution on a growing/shrinking statevector.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::PartyId;
use crate::error::{Error, Result};
use crate::sim::{noise::sample_pauli_error, Gate, NoiseModel, Pauli, StateVector};

/// Logical name of a live qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Ancilla,
    /// Qubit `k` of a client's data register.
    Data(PartyId, usize),
    /// Client-side half of Bell pair `id`.
    BellClient(usize),
    /// Server-side half of Bell pair `id`.
    BellServer(usize),
}

/// Where a noise event can occur. Pair ids index the teleported qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseSite {
    BellH(usize),
    BellCx(usize),
    ClientCx(usize),
    ClientH(usize),
    CorrZ(usize),
    CorrX(usize),
    SwapH1,
    SwapCswap(usize),
    SwapH2,
    DecoyH(usize),
    DecoyX(usize),
}

/// Supplies the Pauli error (if any) inserted after a gate.
pub trait ErrorSource {
    fn sample(&mut self, site: NoiseSite, arity: usize) -> Option<Vec<Pauli>>;
}

pub struct NoErrors;

impl ErrorSource for NoErrors {
    fn sample(&mut self, _: NoiseSite, _: usize) -> Option<Vec<Pauli>> {
        None
    }
}

/// Depolarizing trajectories drawn from a dedicated generator.
pub struct Depolarizing {
    pub model: NoiseModel,
    pub rng: ChaCha8Rng,
}

impl ErrorSource for Depolarizing {
    fn sample(&mut self, _: NoiseSite, arity: usize) -> Option<Vec<Pauli>> {
        sample_pauli_error(arity, &self.model, &mut self.rng)
    }
}

/// Fixed error pattern, for comparing execution engines.
#[derive(Debug, Default, Clone)]
pub struct Scripted(pub HashMap<NoiseSite, Vec<Pauli>>);

impl ErrorSource for Scripted {
    fn sample(&mut self, site: NoiseSite, _: usize) -> Option<Vec<Pauli>> {
        self.0.get(&site).cloned()
    }
}

pub struct Circuit<'a> {
    state: Option<StateVector>,
    labels: Vec<Label>,
    max_qubits: usize,
    peak: usize,
    rng: &'a mut ChaCha8Rng,
    errors: &'a mut dyn ErrorSource,
}

impl<'a> Circuit<'a> {
    pub fn new(
        max_qubits: usize,
        rng: &'a mut ChaCha8Rng,
        errors: &'a mut dyn ErrorSource,
    ) -> Self {
        Circuit {
            state: None,
            labels: Vec::new(),
            max_qubits,
            peak: 0,
            rng,
            errors,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }

    /// Largest number of simultaneously live qubits so far.
    pub fn peak_qubits(&self) -> usize {
        self.peak
    }

    pub fn live_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn state(&self) -> &StateVector {
        self.state.as_ref().expect("empty circuit")
    }

    /// Append `sv` on new high qubits named by `labels`.
    pub fn push(&mut self, sv: &StateVector, labels: &[Label]) -> Result<()> {
        debug_assert_eq!(sv.num_qubits(), labels.len());
        match &mut self.state {
            None => {
                if sv.num_qubits() > self.max_qubits {
                    return Err(Error::Capacity {
                        requested: sv.num_qubits(),
                        max: self.max_qubits,
                    });
                }
                self.state = Some(sv.clone());
            }
            Some(s) => s.extend(sv, self.max_qubits)?,
        }
        self.labels.extend_from_slice(labels);
        self.peak = self.peak.max(self.labels.len());
        Ok(())
    }

    pub fn index(&self, l: Label) -> Result<usize> {
        self.labels
            .iter()
            .position(|&x| x == l)
            .ok_or_else(|| Error::Protocol(format!("qubit {l:?} is not live")))
    }

    fn state_mut(&mut self) -> &mut StateVector {
        self.state.as_mut().expect("empty circuit")
    }

    fn noisy(&mut self, gate: Gate, targets: &[usize], site: NoiseSite) -> Result<()> {
        self.state_mut().apply(gate)?;
        if let Some(paulis) = self.errors.sample(site, targets.len()) {
            for (&q, p) in targets.iter().zip(paulis) {
                self.state_mut().apply_pauli(q, p)?;
            }
        }
        Ok(())
    }

    pub fn h(&mut self, l: Label, site: NoiseSite) -> Result<()> {
        let q = self.index(l)?;
        self.noisy(Gate::H(q), &[q], site)
    }

    pub fn x(&mut self, l: Label, site: NoiseSite) -> Result<()> {
        let q = self.index(l)?;
        self.noisy(Gate::X(q), &[q], site)
    }

    pub fn z(&mut self, l: Label, site: NoiseSite) -> Result<()> {
        let q = self.index(l)?;
        self.noisy(Gate::Z(q), &[q], site)
    }

    pub fn cx(&mut self, control: Label, target: Label, site: NoiseSite) -> Result<()> {
        let (c, t) = (self.index(control)?, self.index(target)?);
        self.noisy(
            Gate::CX {
                control: c,
                target: t,
            },
            &[c, t],
            site,
        )
    }

    pub fn cswap(&mut self, control: Label, a: Label, b: Label, site: NoiseSite) -> Result<()> {
        let (c, qa, qb) = (self.index(control)?, self.index(a)?, self.index(b)?);
        self.noisy(
            Gate::CSwap {
                control: c,
                a: qa,
                b: qb,
            },
            &[c, qa, qb],
            site,
        )
    }

    pub fn measure(&mut self, l: Label) -> Result<u8> {
        let q = self.index(l)?;
        let state = self.state.as_mut().expect("empty circuit");
        state.measure(q, self.rng)
    }

    pub fn prob_zero(&self, l: Label) -> Result<f64> {
        self.state().prob_zero(self.index(l)?)
    }

    pub fn discard(&mut self, ls: &[Label]) -> Result<()> {
        let idx: Vec<usize> = ls.iter().map(|&l| self.index(l)).collect::<Result<_>>()?;
        self.state_mut().discard_measured(&idx)?;
        let mut sorted = idx;
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        for i in sorted {
            self.labels.remove(i);
        }
        Ok(())
    }

    /// Amplitudes of the sub-register `ls` (ls[0] least significant), which
    /// must be unentangled from everything else. Used to read out the
    /// server's register in tests.
    pub fn extract(&self, ls: &[Label]) -> Result<StateVector> {
        let idx: Vec<usize> = ls.iter().map(|&l| self.index(l)).collect::<Result<_>>()?;
        let state = self.state();
        let amps = state.amplitudes();
        let rest_mask: usize = (0..state.num_qubits())
            .filter(|q| !idx.contains(q))
            .map(|q| 1usize << q)
            .sum();
        // pick the heaviest configuration of the other qubits as reference
        let (best, _) = amps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .expect("non-empty");
        let base = best & rest_mask;
        let mut out: Vec<_> = (0..1usize << idx.len())
            .map(|k| {
                let mut i = base;
                for (bit, &q) in idx.iter().enumerate() {
                    i |= (k >> bit & 1) << q;
                }
                amps[i]
            })
            .collect();
        let norm = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        out.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(out)
    }

    pub fn random_bit(&mut self) -> u8 {
        self.rng.gen::<bool>() as u8
    }
}
