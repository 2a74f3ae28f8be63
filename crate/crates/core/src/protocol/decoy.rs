//! Decoy sessions for eavesdropper detection.
//!
//! A decoy is a product of per-qubit states drawn from {|0⟩, |1⟩, |+⟩, |−⟩}
//! on a schedule shared by the client and the server. The server undoes the
//! preparation after teleportation and expects all-zero outcomes. An
//! intercept-resend attack on the Bell halves collapses each teleported
//! qubit to the computational basis, which goes unnoticed on |0⟩/|1⟩ and
//! is caught with probability 1/2 on |±⟩, so a decoy of n qubits exposes
//! the attack with probability 1 − (3/4)^n.

use rand::Rng;

use super::circuit::{Circuit, Depolarizing, ErrorSource, Label, NoErrors, NoiseSite};
use super::session::{stream_client, SessionConfig};
use super::PartyId;
use crate::error::Result;
use crate::seed::{derive_seed, derived_rng, rng_from, Purpose};
use crate::sim::{Gate, StateVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoyOutcome {
    pub passed: bool,
    /// Per qubit: (Hadamard basis, bit value).
    pub schedule: Vec<(bool, bool)>,
    pub intercepted: usize,
}

/// Detection probability of an intercept-resend attack by one n-qubit decoy.
pub fn decoy_detection_probability(n: usize) -> f64 {
    1.0 - 0.75f64.powi(n as i32)
}

fn decoy_state(schedule: &[(bool, bool)]) -> Result<StateVector> {
    let mut s = StateVector::new(schedule.len())?;
    for (q, &(hadamard, bit)) in schedule.iter().enumerate() {
        if bit {
            s.apply(Gate::X(q))?;
        }
        if hadamard {
            s.apply(Gate::H(q))?;
        }
    }
    Ok(s)
}

/// Teleport a scheduled decoy from client A and check it on the server.
pub fn run_decoy_session(
    config: &SessionConfig,
    session_id: u64,
    seed: u64,
) -> Result<DecoyOutcome> {
    config.validate()?;
    let n = config.qubits;
    // the schedule is known to client and server through the shared seed
    let mut sched_rng = derived_rng(config.shared_seed, session_id, 0, Purpose::Decoy);
    let schedule: Vec<(bool, bool)> = (0..n).map(|_| (sched_rng.gen(), sched_rng.gen())).collect();
    let register = decoy_state(&schedule)?;

    let mut rng = rng_from(derive_seed(seed, 1, 0, Purpose::Decoy));
    let mut depol = Depolarizing {
        model: config.noise,
        rng: rng_from(derive_seed(seed, 2, 0, Purpose::Decoy)),
    };
    let mut none = NoErrors;
    let errors: &mut dyn ErrorSource = if config.noise.is_noiseless() {
        &mut none
    } else {
        &mut depol
    };
    let mut c = Circuit::new(config.max_qubits, &mut rng, errors);
    let mut intercepted = 0;
    stream_client(
        &mut c,
        PartyId::ClientA,
        &register,
        0,
        config.adversary,
        &mut intercepted,
    )?;

    let mut passed = true;
    for (k, &(hadamard, bit)) in schedule.iter().enumerate() {
        let q = Label::BellServer(k);
        if hadamard {
            c.h(q, NoiseSite::DecoyH(k))?;
        }
        if bit {
            c.x(q, NoiseSite::DecoyX(k))?;
        }
        if c.measure(q)? != 0 {
            passed = false;
        }
    }
    Ok(DecoyOutcome {
        passed,
        schedule,
        intercepted,
    })
}
