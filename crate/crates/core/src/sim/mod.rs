//! Dense statevector simulation.
//!
//! Qubit 0 is the least significant bit of the amplitude index.

pub mod noise;
mod state;

pub use noise::{apply_pauli_noise, NoiseLevel, NoiseModel};
pub use state::{Gate, Pauli, StateVector, DEFAULT_MAX_QUBITS};

pub use num_complex::Complex64 as C64;

/// Tolerance used for normalization and basis-state checks.
pub const NORM_TOL: f64 = 1e-10;
