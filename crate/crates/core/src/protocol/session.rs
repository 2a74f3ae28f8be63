use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::circuit::{Circuit, Depolarizing, ErrorSource, Label, NoErrors, NoiseSite};
use super::frame::{
    channel_clean_swap_probability, channel_swap_error_shot, frame_ancilla_probability,
    swap_error_free_probability, teleport_channel,
};
use super::PartyId;
use crate::digest::config_digest;
use crate::encodings::{obfuscation_unitary, EncodedPoint, Encoder, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from, Purpose};
use crate::sim::{NoiseModel, StateVector, DEFAULT_MAX_QUBITS};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    /// All 6n+1 qubits live at once.
    FullCircuit,
    /// Qubit-by-qubit teleportation with eager measurement and discard;
    /// at most 2n+3 live qubits.
    #[default]
    Streaming,
}

/// How shots are executed. Without noise, `Trajectory` and `PauliFrame`
/// run the circuit once and sample every shot from its exact P(0), while
/// `Channel` uses the analytic P(0) without building the circuit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotEngine {
    /// Re-run the full statevector circuit for every shot.
    Trajectory,
    /// Propagate sampled Pauli errors through the Clifford teleportation
    /// stage as a frame and simulate only the swap test when it is hit.
    PauliFrame,
    /// Reduce teleportation noise to its exact per-qubit Pauli channel;
    /// shots with an error-free swap test are drawn from the channel's mean
    /// P(0), the rest are simulated.
    #[default]
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Qubits per encoded point.
    pub qubits: usize,
    pub shots: usize,
    pub noise: NoiseModel,
    pub shared_seed: u64,
    pub mode: ExecutionMode,
    pub decoy: bool,
    pub adversary: bool,
    /// Apply the shared-seed signed permutation to both encodings.
    pub obfuscate: bool,
    /// Independent encodings per pair, each run for `shots` shots.
    pub repetitions: usize,
    pub engine: ShotEngine,
    pub max_qubits: usize,
}

impl SessionConfig {
    pub fn new(qubits: usize, shots: usize) -> Self {
        SessionConfig {
            qubits,
            shots,
            noise: NoiseModel::none(),
            shared_seed: 0,
            mode: ExecutionMode::Streaming,
            decoy: false,
            adversary: false,
            obfuscate: true,
            repetitions: 1,
            engine: ShotEngine::Channel,
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }

    /// Live qubits needed by `mode`.
    pub fn required_qubits(&self) -> usize {
        required_qubits(self.qubits, self.mode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits == 0 {
            return Err(Error::Invalid(
                "sessions need at least one qubit per point".into(),
            ));
        }
        if self.shots == 0 || self.repetitions == 0 {
            return Err(Error::Invalid(
                "shots and repetitions must be at least 1".into(),
            ));
        }
        self.noise.validate()?;
        let need = self.required_qubits();
        if need > self.max_qubits {
            return Err(Error::Capacity {
                requested: need,
                max: self.max_qubits,
            });
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        config_digest(self)
    }
}

pub fn required_qubits(n: usize, mode: ExecutionMode) -> usize {
    match mode {
        ExecutionMode::FullCircuit => 6 * n + 1,
        ExecutionMode::Streaming => 2 * n + 3,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BellPair {
    pub id: usize,
    pub client: PartyId,
    pub server: PartyId,
    pub consumed: bool,
}

/// The helper's 2n pairs: the first n shared by client A and the server,
/// the rest by client B and the server.
pub fn prepare_bell_pairs(n: usize) -> Result<Vec<BellPair>> {
    if n == 0 {
        return Err(Error::Invalid("need at least one qubit per client".into()));
    }
    let need = required_qubits(n, ExecutionMode::Streaming);
    if need > DEFAULT_MAX_QUBITS {
        return Err(Error::Capacity {
            requested: need,
            max: DEFAULT_MAX_QUBITS,
        });
    }
    Ok((0..2 * n)
        .map(|id| BellPair {
            id,
            client: if id < n {
                PartyId::ClientA
            } else {
                PartyId::ClientB
            },
            server: PartyId::Server,
            consumed: false,
        })
        .collect())
}

/// Two classical bits for one teleported qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub sender: PartyId,
    pub receiver: PartyId,
    pub qubit: usize,
    pub data_bit: u8,
    pub entangled_bit: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub session_id: u64,
    pub config_digest: String,
    pub qubits: usize,
    /// Teleportation messages of the first executed shot, n per client.
    pub messages: Vec<ClassicalMessage>,
    /// Norm factors the clients announce alongside their bits.
    pub norm_factors: (f64, f64),
    /// Ancilla outcomes, `shots * repetitions` of them.
    pub shots: Vec<u8>,
    pub zeros: usize,
    pub estimate: f64,
    /// Exact ancilla P(0) when the session has a single well-defined value
    /// (noiseless, no adversary).
    pub ancilla_p0: Option<f64>,
    pub decoy_verdict: Option<bool>,
    /// Qubits measured by the eavesdropper across all shots.
    pub intercepted: usize,
    pub peak_qubits: usize,
}

/// `2·zeros/p − 1`, an unbiased estimate of `|⟨a|b⟩|²`.
pub fn estimate_overlap(outcomes: &[u8]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Invalid("no shot outcomes".into()));
    }
    let zeros = outcomes.iter().filter(|&&b| b == 0).count();
    Ok(2.0 * zeros as f64 / outcomes.len() as f64 - 1.0)
}

pub struct Execution {
    pub p0: f64,
    pub messages: Vec<ClassicalMessage>,
    pub intercepted: usize,
    pub peak_qubits: usize,
}

fn basis_zero(n: usize) -> StateVector {
    StateVector::new(n).expect("small register")
}

fn bell_labels(id: usize) -> [Label; 2] {
    [Label::BellClient(id), Label::BellServer(id)]
}

/// Helper: allocate pair `id` as (|00⟩ + |11⟩)/√2.
pub(crate) fn helper_prepare(c: &mut Circuit, id: usize) -> Result<()> {
    c.push(&basis_zero(2), &bell_labels(id))?;
    c.h(Label::BellClient(id), NoiseSite::BellH(id))?;
    c.cx(
        Label::BellClient(id),
        Label::BellServer(id),
        NoiseSite::BellCx(id),
    )
}

/// Eavesdropper: measure the client-bound half in flight and forward a
/// freshly prepared basis state carrying the observed value.
pub(crate) fn intercept_resend(c: &mut Circuit, id: usize) -> Result<u8> {
    let bit = c.measure(Label::BellClient(id))?;
    // post-measurement the qubit already is |bit⟩, which is what gets resent
    Ok(bit)
}

/// Client + server steps for one qubit: CX(data → Bell half), H(data),
/// measure both, then the server applies Z^data_bit and X^entangled_bit.
pub(crate) fn teleport_qubit(
    c: &mut Circuit,
    data: Label,
    id: usize,
    sender: PartyId,
    qubit: usize,
) -> Result<ClassicalMessage> {
    c.cx(data, Label::BellClient(id), NoiseSite::ClientCx(id))?;
    c.h(data, NoiseSite::ClientH(id))?;
    let data_bit = c.measure(data)?;
    let entangled_bit = c.measure(Label::BellClient(id))?;
    if data_bit == 1 {
        c.z(Label::BellServer(id), NoiseSite::CorrZ(id))?;
    }
    if entangled_bit == 1 {
        c.x(Label::BellServer(id), NoiseSite::CorrX(id))?;
    }
    Ok(ClassicalMessage {
        sender,
        receiver: PartyId::Server,
        qubit,
        data_bit,
        entangled_bit,
    })
}

fn data_labels(party: PartyId, n: usize) -> Vec<Label> {
    (0..n).map(|k| Label::Data(party, k)).collect()
}

/// Stream one client's register to the server. Pair ids start at `offset`.
pub(crate) fn stream_client(
    c: &mut Circuit,
    party: PartyId,
    register: &StateVector,
    offset: usize,
    adversary: bool,
    intercepted: &mut usize,
) -> Result<Vec<ClassicalMessage>> {
    let n = register.num_qubits();
    c.push(register, &data_labels(party, n))?;
    let mut messages = Vec::with_capacity(n);
    for k in 0..n {
        let id = offset + k;
        helper_prepare(c, id)?;
        if adversary {
            intercept_resend(c, id)?;
            *intercepted += 1;
        }
        messages.push(teleport_qubit(c, Label::Data(party, k), id, party, k)?);
        c.discard(&[Label::Data(party, k), Label::BellClient(id)])?;
    }
    Ok(messages)
}

fn swap_stage(c: &mut Circuit, n: usize) -> Result<f64> {
    c.h(Label::Ancilla, NoiseSite::SwapH1)?;
    for k in 0..n {
        c.cswap(
            Label::Ancilla,
            Label::BellServer(k),
            Label::BellServer(n + k),
            NoiseSite::SwapCswap(k),
        )?;
    }
    c.h(Label::Ancilla, NoiseSite::SwapH2)?;
    c.prob_zero(Label::Ancilla)
}

/// One execution of the whole protocol circuit, returning the exact
/// ancilla P(0) of the final state.
pub fn execute_circuit(
    a: &StateVector,
    b: &StateVector,
    mode: ExecutionMode,
    max_qubits: usize,
    adversary: bool,
    rng: &mut ChaCha8Rng,
    errors: &mut dyn ErrorSource,
) -> Result<Execution> {
    let n = a.num_qubits();
    if b.num_qubits() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b.num_qubits(),
        });
    }
    let mut c = Circuit::new(max_qubits, rng, errors);
    let mut intercepted = 0;
    c.push(&basis_zero(1), &[Label::Ancilla])?;
    let mut messages = Vec::with_capacity(2 * n);
    match mode {
        ExecutionMode::Streaming => {
            messages.extend(stream_client(
                &mut c,
                PartyId::ClientA,
                a,
                0,
                adversary,
                &mut intercepted,
            )?);
            messages.extend(stream_client(
                &mut c,
                PartyId::ClientB,
                b,
                n,
                adversary,
                &mut intercepted,
            )?);
        }
        ExecutionMode::FullCircuit => {
            let need = required_qubits(n, mode);
            if need > max_qubits {
                return Err(Error::Capacity {
                    requested: need,
                    max: max_qubits,
                });
            }
            c.push(a, &data_labels(PartyId::ClientA, n))?;
            c.push(b, &data_labels(PartyId::ClientB, n))?;
            for id in 0..2 * n {
                helper_prepare(&mut c, id)?;
            }
            if adversary {
                for id in 0..2 * n {
                    intercept_resend(&mut c, id)?;
                    intercepted += 1;
                }
            }
            for (party, offset) in [(PartyId::ClientA, 0), (PartyId::ClientB, n)] {
                for k in 0..n {
                    messages.push(teleport_qubit(
                        &mut c,
                        Label::Data(party, k),
                        offset + k,
                        party,
                        k,
                    )?);
                }
            }
        }
    }
    let p0 = swap_stage(&mut c, n)?;
    Ok(Execution {
        p0,
        messages,
        intercepted,
        peak_qubits: c.peak_qubits(),
    })
}

/// Teleport `register` through `pairs` (one per qubit, all owned by the
/// same client). Returns the server's register and the classical messages.
pub fn teleport_register(
    register: &StateVector,
    pairs: &mut [BellPair],
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Result<(StateVector, Vec<ClassicalMessage>)> {
    let n = register.num_qubits();
    if pairs.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: pairs.len(),
        });
    }
    if let Some(p) = pairs.iter().find(|p| p.consumed) {
        return Err(Error::Protocol(format!(
            "Bell pair {} was already used",
            p.id
        )));
    }
    let party = pairs[0].client;
    let mut depol = Depolarizing {
        model: *noise,
        rng: rng_from(rng.gen()),
    };
    let mut none = NoErrors;
    let errors: &mut dyn ErrorSource = if noise.is_noiseless() {
        &mut none
    } else {
        &mut depol
    };
    let mut c = Circuit::new(DEFAULT_MAX_QUBITS, rng, errors);
    c.push(register, &data_labels(party, n))?;
    let mut messages = Vec::with_capacity(n);
    for (k, pair) in pairs.iter_mut().enumerate() {
        helper_prepare(&mut c, pair.id)?;
        messages.push(teleport_qubit(
            &mut c,
            Label::Data(party, k),
            pair.id,
            party,
            k,
        )?);
        c.discard(&[Label::Data(party, k), Label::BellClient(pair.id)])?;
        pair.consumed = true;
    }
    let server: Vec<Label> = pairs.iter().map(|p| Label::BellServer(p.id)).collect();
    Ok((c.extract(&server)?, messages))
}

/// Exact swap-test ancilla P(0) for two registers on the server.
pub fn swap_test_probability(a: &StateVector, b: &StateVector) -> Result<f64> {
    swap_test_inner(a, b, &mut NoErrors, &mut rng_from(0))
}

fn swap_test_inner(
    a: &StateVector,
    b: &StateVector,
    errors: &mut dyn ErrorSource,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let n = a.num_qubits();
    if b.num_qubits() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b.num_qubits(),
        });
    }
    let mut c = Circuit::new(DEFAULT_MAX_QUBITS, rng, errors);
    c.push(&basis_zero(1), &[Label::Ancilla])?;
    c.push(a, &(0..n).map(Label::BellServer).collect::<Vec<_>>())?;
    c.push(b, &(n..2 * n).map(Label::BellServer).collect::<Vec<_>>())?;
    swap_stage(&mut c, n)
}

/// One swap-test shot: H on the ancilla, controlled swaps of qubit i of
/// `a` with qubit i of `b`, H, measure. Returns the ancilla bit.
pub fn swap_test(
    a: &StateVector,
    b: &StateVector,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Result<u8> {
    let p0 = if noise.is_noiseless() {
        swap_test_probability(a, b)?
    } else {
        let mut depol = Depolarizing {
            model: *noise,
            rng: rng_from(rng.gen()),
        };
        swap_test_inner(a, b, &mut depol, &mut rng_from(0))?
    };
    Ok(if rng.gen::<f64>() < p0 { 0 } else { 1 })
}

/// Exact noiseless ancilla P(0) of a full protocol run on two encodings.
pub fn ancilla_probability(
    a: &EncodedPoint,
    b: &EncodedPoint,
    mode: ExecutionMode,
    seed: u64,
) -> Result<f64> {
    let (sa, sb) = (
        StateVector::from_real(&a.amplitudes)?,
        StateVector::from_real(&b.amplitudes)?,
    );
    let mut rng = rng_from(seed);
    Ok(execute_circuit(
        &sa,
        &sb,
        mode,
        DEFAULT_MAX_QUBITS,
        false,
        &mut rng,
        &mut NoErrors,
    )?
    .p0)
}

/// Run a session on two already-encoded points.
///
/// Noiseless sessions without an adversary execute the circuit once and
/// draw the `shots` ancilla outcomes from the exact P(0); otherwise every
/// shot is a fresh noisy trajectory.
pub fn run_session_encoded(
    a: &EncodedPoint,
    b: &EncodedPoint,
    config: &SessionConfig,
    session_id: u64,
    seed: u64,
) -> Result<ProtocolTranscript> {
    config.validate()?;
    let n = config.qubits;
    if a.num_qubits() != n || b.num_qubits() != n {
        return Err(Error::Dimension {
            expected: n,
            got: if a.num_qubits() != n {
                a.num_qubits()
            } else {
                b.num_qubits()
            },
        });
    }
    let mut teleport_rng = rng_from(derive_seed(seed, 0, 0, Purpose::Teleport));
    let mut shot_rng = rng_from(derive_seed(seed, 0, 0, Purpose::Shots));
    let mut depol = Depolarizing {
        model: config.noise,
        rng: rng_from(derive_seed(seed, 0, 0, Purpose::Noise)),
    };
    let noiseless = config.noise.is_noiseless();

    let mut shots = Vec::with_capacity(config.shots * config.repetitions);
    let mut messages = Vec::new();
    let mut intercepted = 0;
    let mut peak = 0;
    let mut exact_p0 = None;

    for rep in 0..config.repetitions {
        let (amps_a, amps_b) = if config.obfuscate {
            let round = session_id
                .wrapping_mul(config.repetitions as u64)
                .wrapping_add(rep as u64);
            let ob = obfuscation_unitary(a.amplitudes.len(), config.shared_seed, round)?;
            (ob.apply(&a.amplitudes)?, ob.apply(&b.amplitudes)?)
        } else {
            (a.amplitudes.clone(), b.amplitudes.clone())
        };
        let sa = StateVector::from_real(&amps_a)?;
        let sb = StateVector::from_real(&amps_b)?;

        if noiseless && !config.adversary && config.engine != ShotEngine::Channel {
            let ex = execute_circuit(
                &sa,
                &sb,
                config.mode,
                config.max_qubits,
                false,
                &mut teleport_rng,
                &mut NoErrors,
            )?;
            if messages.is_empty() {
                messages = ex.messages;
            }
            peak = peak.max(ex.peak_qubits);
            exact_p0 = Some(ex.p0);
            for _ in 0..config.shots {
                shots.push(if shot_rng.gen::<f64>() < ex.p0 { 0 } else { 1 });
            }
        } else if config.engine == ShotEngine::Channel && !config.adversary {
            let channel = teleport_channel(&config.noise);
            let clean = channel_clean_swap_probability(&sa, &sb, &channel)?;
            let hit = 1.0 - swap_error_free_probability(&config.noise, n);
            if noiseless {
                exact_p0 = Some(clean);
            }
            if messages.is_empty() {
                let bits: Vec<(u8, u8)> = (0..2 * n)
                    .map(|_| {
                        (
                            teleport_rng.gen::<bool>() as u8,
                            teleport_rng.gen::<bool>() as u8,
                        )
                    })
                    .collect();
                messages = to_messages(&bits, n);
            }
            for _ in 0..config.shots {
                let p0 = if hit > 0.0 && depol.rng.gen::<f64>() < hit {
                    // only the swap test's 2n + 1 qubits are simulated
                    peak = peak.max(2 * n + 1);
                    channel_swap_error_shot(&sa, &sb, &channel, &config.noise, &mut depol.rng)?
                } else {
                    clean
                };
                shots.push(if shot_rng.gen::<f64>() < p0 { 0 } else { 1 });
            }
        } else if config.engine == ShotEngine::PauliFrame && !config.adversary {
            let mut bits = Vec::new();
            for s in 0..config.shots {
                let p0 =
                    frame_ancilla_probability(&sa, &sb, &mut depol, &mut teleport_rng, &mut bits)?;
                if s == 0 && messages.is_empty() {
                    messages = to_messages(&bits, n);
                }
                shots.push(if shot_rng.gen::<f64>() < p0 { 0 } else { 1 });
            }
            peak = peak.max(required_qubits(n, ExecutionMode::Streaming));
        } else {
            let mut none = NoErrors;
            for _ in 0..config.shots {
                let errors: &mut dyn ErrorSource = if noiseless { &mut none } else { &mut depol };
                let ex = execute_circuit(
                    &sa,
                    &sb,
                    config.mode,
                    config.max_qubits,
                    config.adversary,
                    &mut teleport_rng,
                    errors,
                )?;
                if messages.is_empty() {
                    messages = ex.messages;
                }
                intercepted += ex.intercepted;
                peak = peak.max(ex.peak_qubits);
                shots.push(if shot_rng.gen::<f64>() < ex.p0 { 0 } else { 1 });
            }
        }
    }

    let zeros = shots.iter().filter(|&&s| s == 0).count();
    let estimate = estimate_overlap(&shots)?;
    Ok(ProtocolTranscript {
        session_id,
        config_digest: config.digest(),
        qubits: n,
        messages,
        norm_factors: (a.norm_factor, b.norm_factor),
        shots,
        zeros,
        estimate,
        ancilla_p0: if config.repetitions == 1 {
            exact_p0
        } else {
            None
        },
        decoy_verdict: None,
        intercepted,
        peak_qubits: peak,
    })
}

fn to_messages(bits: &[(u8, u8)], n: usize) -> Vec<ClassicalMessage> {
    bits.iter()
        .enumerate()
        .map(|(id, &(d, e))| {
            let sender = if id < n {
                PartyId::ClientA
            } else {
                PartyId::ClientB
            };
            ClassicalMessage {
                sender,
                receiver: PartyId::Server,
                qubit: id % n,
                data_bit: d,
                entangled_bit: e,
            }
        })
        .collect()
}

/// End-to-end session for raw points `x` (client A) and `y` (client B).
///
/// Both clients rebuild the feature map's random draws from
/// `config.shared_seed`; the server only sees teleported registers,
/// classical correction bits and the announced norm factors.
pub fn run_session(
    x: &[f64],
    y: &[f64],
    spec: &FeatureMapSpec,
    config: &SessionConfig,
    session_id: u64,
    seed: u64,
) -> Result<ProtocolTranscript> {
    let encoder_a = Encoder::new(*spec, config.shared_seed)?;
    let encoder_b = Encoder::new(*spec, config.shared_seed)?;
    let a = encoder_a.encode(x)?;
    let b = encoder_b.encode(y)?;
    if a.num_qubits() != config.qubits {
        return Err(Error::Dimension {
            expected: config.qubits,
            got: a.num_qubits(),
        });
    }
    let mut transcript = run_session_encoded(&a, &b, config, session_id, seed)?;
    if config.decoy {
        let outcome = super::run_decoy_session(config, session_id, seed)?;
        transcript.decoy_verdict = Some(outcome.passed);
        transcript.intercepted += outcome.intercepted;
    }
    Ok(transcript)
}
