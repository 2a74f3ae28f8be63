//! Line-delimited JSON export of session transcripts.
//!
//! One object per line:
//! `{"session_id", "config_digest", "qubits", "bits_a", "bits_b",
//!   "norm_a", "norm_b", "shots", "zeros", "ones", "estimate",
//!   "ancilla_p0", "decoy_verdict", "intercepted"}`
//! where `bits_a`/`bits_b` hold two characters (data bit, entangled bit)
//! per teleported qubit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{PartyId, ProtocolTranscript};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub session_id: u64,
    pub config_digest: String,
    pub qubits: usize,
    pub bits_a: String,
    pub bits_b: String,
    pub norm_a: f64,
    pub norm_b: f64,
    pub shots: usize,
    pub zeros: usize,
    pub ones: usize,
    pub estimate: f64,
    pub ancilla_p0: Option<f64>,
    pub decoy_verdict: Option<bool>,
    pub intercepted: usize,
}

impl From<&ProtocolTranscript> for TranscriptRecord {
    fn from(t: &ProtocolTranscript) -> Self {
        let bits = |party: PartyId| -> String {
            t.messages
                .iter()
                .filter(|m| m.sender == party)
                .flat_map(|m| [m.data_bit, m.entangled_bit])
                .map(|b| if b == 0 { '0' } else { '1' })
                .collect()
        };
        TranscriptRecord {
            session_id: t.session_id,
            config_digest: t.config_digest.clone(),
            qubits: t.qubits,
            bits_a: bits(PartyId::ClientA),
            bits_b: bits(PartyId::ClientB),
            norm_a: t.norm_factors.0,
            norm_b: t.norm_factors.1,
            shots: t.shots.len(),
            zeros: t.zeros,
            ones: t.shots.len() - t.zeros,
            estimate: t.estimate,
            ancilla_p0: t.ancilla_p0,
            decoy_verdict: t.decoy_verdict,
            intercepted: t.intercepted,
        }
    }
}

/// Thread-safe appender; each record is written as one whole line.
pub struct TranscriptSink {
    out: Mutex<BufWriter<Box<dyn Write + Send>>>,
}

impl TranscriptSink {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self::from_writer(Box::new(File::create(path)?)))
    }

    pub fn from_writer(w: Box<dyn Write + Send>) -> Self {
        TranscriptSink {
            out: Mutex::new(BufWriter::new(w)),
        }
    }

    pub fn append(&self, t: &ProtocolTranscript) -> Result<()> {
        let line = serde_json::to_string(&TranscriptRecord::from(t)).expect("record serializes");
        let mut out = self.out.lock().expect("sink poisoned");
        writeln!(out, "{line}")?;
        Ok(())
    }

    pub fn flush(&self) -> Result<()> {
        self.out.lock().expect("sink poisoned").flush()?;
        Ok(())
    }
}
