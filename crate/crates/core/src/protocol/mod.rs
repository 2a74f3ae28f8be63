//! Two-client distributed kernel estimation protocol.
//!
//! A helper prepares 2n Bell pairs; each client teleports its encoded
//! n-qubit register to the server qubit by qubit (CX onto its Bell half, H,
//! measure both, send two classical bits); the server applies Z then X
//! corrections and runs a swap test on the two received registers.

pub mod circuit;
mod decoy;
mod frame;
mod session;
mod transcript;

use serde::{Deserialize, Serialize};

pub use decoy::{decoy_detection_probability, run_decoy_session, DecoyOutcome};
pub use frame::{
    channel_clean_swap_probability, frame_ancilla_probability, swap_error_free_probability,
    teleport_channel,
};
pub use session::{
    ancilla_probability, estimate_overlap, execute_circuit, prepare_bell_pairs, required_qubits,
    run_session, run_session_encoded, swap_test, swap_test_probability, teleport_register,
    BellPair, ClassicalMessage, Execution, ExecutionMode, ProtocolTranscript, SessionConfig,
    ShotEngine,
};
pub use transcript::{TranscriptRecord, TranscriptSink};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyId {
    Helper,
    ClientA,
    ClientB,
    Server,
    Eavesdropper,
}
