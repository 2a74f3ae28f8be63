//! Pauli-frame execution of noisy shots.
//!
//! Teleportation is a Clifford circuit, so a Pauli error inserted anywhere
//! in it is equivalent to a Pauli on the server's output qubit: propagate
//! through H and CX by conjugation; an X component reaching a measured qubit
//! flips that outcome and therefore the matching correction. Correction
//! gates run only when their (uniformly random) outcome bit is 1, so only
//! then can they fail. The swap test is not Clifford; when it draws an
//! error it is simulated on the 2n+1 server qubits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use std::collections::HashMap;

use super::circuit::{ErrorSource, NoiseSite, Scripted};
use crate::error::{Error, Result};
use crate::sim::noise::sample_pauli_error;
use crate::sim::{Gate, NoiseModel, Pauli, StateVector, C64};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Frame {
    x: bool,
    z: bool,
}

impl Frame {
    fn add(&mut self, p: Pauli) {
        match p {
            Pauli::I => {}
            Pauli::X => self.x ^= true,
            Pauli::Y => {
                self.x ^= true;
                self.z ^= true;
            }
            Pauli::Z => self.z ^= true,
        }
    }

    fn is_identity(&self) -> bool {
        !self.x && !self.z
    }

    fn index(&self) -> usize {
        self.x as usize | (self.z as usize) << 1
    }

    fn from_index(i: usize) -> Frame {
        Frame {
            x: i & 1 == 1,
            z: i & 2 == 2,
        }
    }
}

fn add_errors(errors: &mut dyn ErrorSource, site: NoiseSite, frames: &mut [&mut Frame]) {
    if let Some(ps) = errors.sample(site, frames.len()) {
        for (f, p) in frames.iter_mut().zip(ps) {
            f.add(p);
        }
    }
}

/// Output frame of teleporting one qubit through pair `id` given the
/// measured (data, entangled) bits.
fn teleport_frame(
    id: usize,
    errors: &mut dyn ErrorSource,
    data_bit: u8,
    entangled_bit: u8,
) -> Frame {
    let (mut d, mut c, mut s) = (Frame::default(), Frame::default(), Frame::default());
    // helper: H(c), CX(c → s)
    add_errors(errors, NoiseSite::BellH(id), &mut [&mut c]);
    s.x ^= c.x;
    c.z ^= s.z;
    add_errors(errors, NoiseSite::BellCx(id), &mut [&mut c, &mut s]);
    // client: CX(d → c), H(d)
    c.x ^= d.x;
    d.z ^= c.z;
    add_errors(errors, NoiseSite::ClientCx(id), &mut [&mut d, &mut c]);
    std::mem::swap(&mut d.x, &mut d.z);
    add_errors(errors, NoiseSite::ClientH(id), &mut [&mut d]);
    // flipped outcomes flip the server's corrections
    s.z ^= d.x;
    s.x ^= c.x;
    if data_bit == 1 {
        add_errors(errors, NoiseSite::CorrZ(id), &mut [&mut s]);
    }
    if entangled_bit == 1 {
        add_errors(errors, NoiseSite::CorrX(id), &mut [&mut s]);
    }
    s
}

fn apply_frames(state: &StateVector, frames: &[Frame]) -> Result<StateVector> {
    let mut out = state.clone();
    for (q, f) in frames.iter().enumerate() {
        if f.x {
            out.apply_pauli(q, Pauli::X)?;
        }
        if f.z {
            out.apply_pauli(q, Pauli::Z)?;
        }
    }
    Ok(out)
}

/// Ancilla P(0) for one noisy shot of the protocol on registers `a`, `b`.
/// `bits` receives the 2n simulated teleportation outcomes of this shot.
pub fn frame_ancilla_probability(
    a: &StateVector,
    b: &StateVector,
    errors: &mut dyn ErrorSource,
    rng: &mut ChaCha8Rng,
    bits: &mut Vec<(u8, u8)>,
) -> Result<f64> {
    let n = a.num_qubits();
    if b.num_qubits() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b.num_qubits(),
        });
    }
    bits.clear();
    let frames: Vec<Frame> = (0..2 * n)
        .map(|id| {
            let data_bit = rng.gen::<bool>() as u8;
            let entangled_bit = rng.gen::<bool>() as u8;
            bits.push((data_bit, entangled_bit));
            teleport_frame(id, errors, data_bit, entangled_bit)
        })
        .collect();

    let h1 = errors.sample(NoiseSite::SwapH1, 1);
    let cswaps: Vec<_> = (0..n)
        .map(|k| errors.sample(NoiseSite::SwapCswap(k), 3))
        .collect();
    let h2 = errors.sample(NoiseSite::SwapH2, 1);

    let clean_frames = frames.iter().all(Frame::is_identity);
    let (fa, fb) = (
        if clean_frames {
            a.clone()
        } else {
            apply_frames(a, &frames[..n])?
        },
        if clean_frames {
            b.clone()
        } else {
            apply_frames(b, &frames[n..])?
        },
    );

    if h1.is_none() && h2.is_none() && cswaps.iter().all(Option::is_none) {
        let ov = fa.overlap(&fb)?.norm_sqr();
        return Ok((0.5 + 0.5 * ov).clamp(0.0, 1.0));
    }
    noisy_swap_test(&fa, &fb, &h1, &cswaps, &h2)
}

fn noisy_swap_test(
    fa: &StateVector,
    fb: &StateVector,
    h1: &Option<Vec<Pauli>>,
    cswaps: &[Option<Vec<Pauli>>],
    h2: &Option<Vec<Pauli>>,
) -> Result<f64> {
    let n = fa.num_qubits();
    // ancilla is qubit 0, register A on 1..=n, register B on n+1..=2n
    let mut state = StateVector::new(1)?;
    state.extend(fa, usize::MAX)?;
    state.extend(fb, usize::MAX)?;
    let apply =
        |state: &mut StateVector, targets: &[usize], err: &Option<Vec<Pauli>>| -> Result<()> {
            if let Some(ps) = err {
                for (&q, &p) in targets.iter().zip(ps) {
                    state.apply_pauli(q, p)?;
                }
            }
            Ok(())
        };
    state.apply(Gate::H(0))?;
    apply(&mut state, &[0], h1)?;
    for (k, err) in cswaps.iter().enumerate() {
        state.apply(Gate::CSwap {
            control: 0,
            a: 1 + k,
            b: 1 + n + k,
        })?;
        apply(&mut state, &[0, 1 + k, 1 + n + k], err)?;
    }
    state.apply(Gate::H(0))?;
    apply(&mut state, &[0], h2)?;
    state.prob_zero(0)
}

fn xor_convolve(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i ^ j] += a[i] * b[j];
        }
    }
    out
}

/// Distribution of the Pauli frame left on the server qubit by one noisy
/// teleportation, indexed `x | z << 1` (I, X, Z, XZ).
///
/// The frame is XOR-linear in the inserted errors, so each site's
/// contribution is found in isolation and the sites are convolved.
pub fn teleport_channel(model: &NoiseModel) -> [f64; 4] {
    let sites = [
        (NoiseSite::BellH(0), 1, 1.0),
        (NoiseSite::BellCx(0), 2, 1.0),
        (NoiseSite::ClientCx(0), 2, 1.0),
        (NoiseSite::ClientH(0), 1, 1.0),
        // corrections run on half of the shots
        (NoiseSite::CorrZ(0), 1, 0.5),
        (NoiseSite::CorrX(0), 1, 0.5),
    ];
    let mut dist = [1.0, 0.0, 0.0, 0.0];
    for (site, arity, weight) in sites {
        let p = model.error_probability(arity) * weight;
        if p == 0.0 {
            continue;
        }
        let choices = 1usize << (2 * arity);
        let mut local = [1.0 - p, 0.0, 0.0, 0.0];
        for code in 1..choices {
            let paulis = (0..arity)
                .map(|k| Pauli::from_index(code >> (2 * k)))
                .collect();
            let mut script = Scripted(HashMap::from([(site, paulis)]));
            let f = teleport_frame(0, &mut script, 1, 1);
            local[f.index()] += p / (choices - 1) as f64;
        }
        dist = xor_convolve(&dist, &local);
    }
    dist
}

fn walsh_hadamard(v: &mut [C64]) {
    let mut h = 1;
    while h < v.len() {
        for i in (0..v.len()).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Mean ancilla P(0) over teleportation noise, given an error-free swap
/// test: ½ + ½ Σ_R w(R) |⟨a|R|b⟩|² over Pauli strings R, where w is the
/// product of the per-qubit frame distribution of A's and B's qubits.
pub fn channel_clean_swap_probability(
    a: &StateVector,
    b: &StateVector,
    channel: &[f64; 4],
) -> Result<f64> {
    let n = a.num_qubits();
    if b.num_qubits() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b.num_qubits(),
        });
    }
    let r = xor_convolve(channel, channel);
    let dim = 1usize << n;
    let (aa, bb) = (a.amplitudes(), b.amplitudes());
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    let mut total = 0.0;
    for x in 0..dim {
        let x_weight: f64 = (0..n)
            .map(|k| {
                let xk = (x >> k) & 1;
                r[xk] + r[xk | 2]
            })
            .product();
        if x_weight == 0.0 {
            continue;
        }
        // ⟨a|X^x Z^z|b⟩ = Σ_j conj(a[j^x]) (-1)^{|z&j|} b[j]
        for j in 0..dim {
            buf[j] = aa[j ^ x].conj() * bb[j];
        }
        walsh_hadamard(&mut buf);
        for (z, v) in buf.iter().enumerate() {
            let w: f64 = (0..n)
                .map(|k| r[((x >> k) & 1) | (((z >> k) & 1) << 1)])
                .product();
            total += w * v.norm_sqr();
        }
    }
    Ok((0.5 + 0.5 * total).clamp(0.0, 1.0))
}

/// Probability that the swap test on n-qubit registers runs error free.
pub fn swap_error_free_probability(model: &NoiseModel, n: usize) -> f64 {
    (1.0 - model.error_probability(1)).powi(2) * (1.0 - model.error_probability(3)).powi(n as i32)
}

fn sample_frame(channel: &[f64; 4], rng: &mut ChaCha8Rng) -> Frame {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in channel.iter().enumerate() {
        acc += p;
        if u < acc {
            return Frame::from_index(i);
        }
    }
    Frame::from_index(3)
}

/// Ancilla P(0) of one shot conditioned on the swap test drawing at least
/// one error; teleportation frames are drawn from `channel`.
pub fn channel_swap_error_shot(
    a: &StateVector,
    b: &StateVector,
    channel: &[f64; 4],
    model: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let n = a.num_qubits();
    let frames: Vec<Frame> = (0..2 * n).map(|_| sample_frame(channel, rng)).collect();
    let fa = apply_frames(a, &frames[..n])?;
    let fb = apply_frames(b, &frames[n..])?;
    if swap_error_free_probability(model, n) >= 1.0 {
        return Err(Error::Protocol("swap test cannot draw an error".into()));
    }
    loop {
        let h1 = sample_pauli_error(1, model, rng);
        let cswaps: Vec<_> = (0..n).map(|_| sample_pauli_error(3, model, rng)).collect();
        let h2 = sample_pauli_error(1, model, rng);
        if h1.is_some() || h2.is_some() || cswaps.iter().any(Option::is_some) {
            return noisy_swap_test(&fa, &fb, &h1, &cswaps, &h2);
        }
    }
}
