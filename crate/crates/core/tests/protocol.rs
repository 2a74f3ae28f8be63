use std::collections::HashMap;

use dqk_core::encodings::{encode_linear, EncodedPoint, FeatureMapSpec};
use dqk_core::protocol::circuit::{
    Circuit, Depolarizing, ErrorSource, Label, NoErrors, NoiseSite, Scripted,
};
use dqk_core::protocol::*;
use dqk_core::seed::rng_from;
use dqk_core::sim::{NoiseModel, Pauli, StateVector, C64};
use rand::Rng;

fn random_state(n: usize, seed: u64) -> StateVector {
    let mut rng = rng_from(seed);
    let raw: Vec<C64> = (0..1 << n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(raw.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn random_point(len: usize, rng: &mut impl Rng) -> EncodedPoint {
    let x: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
    encode_linear(&x).unwrap()
}

#[test]
fn bell_pair_ownership() {
    let pairs = prepare_bell_pairs(2).unwrap();
    assert_eq!(pairs.len(), 4);
    assert!(pairs[..2].iter().all(|p| p.client == PartyId::ClientA));
    assert!(pairs[2..].iter().all(|p| p.client == PartyId::ClientB));
    assert!(pairs
        .iter()
        .all(|p| p.server == PartyId::Server && !p.consumed));
    assert!(prepare_bell_pairs(12).is_err());
}

#[test]
fn bell_pairs_are_correlated() {
    let trials = 4000;
    let mut zeros = 0;
    let mut rng = rng_from(17);
    for _ in 0..trials {
        let mut errors = NoErrors;
        let mut c = Circuit::new(4, &mut rng, &mut errors);
        c.push(
            &StateVector::new(2).unwrap(),
            &[Label::BellClient(0), Label::BellServer(0)],
        )
        .unwrap();
        c.h(Label::BellClient(0), NoiseSite::BellH(0)).unwrap();
        c.cx(
            Label::BellClient(0),
            Label::BellServer(0),
            NoiseSite::BellCx(0),
        )
        .unwrap();
        let a = c.measure(Label::BellClient(0)).unwrap();
        let b = c.measure(Label::BellServer(0)).unwrap();
        assert_eq!(a, b);
        zeros += (a == 0) as usize;
    }
    let sigma = (0.25 / trials as f64).sqrt();
    assert!((zeros as f64 / trials as f64 - 0.5).abs() < 4.0 * sigma);
}

#[test]
fn teleport_ground_state() {
    let mut pairs = prepare_bell_pairs(1).unwrap();
    let (out, msgs) = teleport_register(
        &StateVector::new(1).unwrap(),
        &mut pairs[..1],
        &NoiseModel::none(),
        &mut rng_from(1),
    )
    .unwrap();
    assert!((out.overlap(&StateVector::new(1).unwrap()).unwrap().norm() - 1.0).abs() < 1e-12);
    assert_eq!(msgs.len(), 1);
    assert!(pairs[0].consumed);
}

#[test]
fn teleport_random_registers_exactly() {
    for seed in 0..40u64 {
        let n = 1 + (seed as usize % 5);
        let input = random_state(n, seed);
        let mut pairs = prepare_bell_pairs(n).unwrap();
        let (out, msgs) = teleport_register(
            &input,
            &mut pairs[..n],
            &NoiseModel::none(),
            &mut rng_from(seed + 100),
        )
        .unwrap();
        assert_eq!(msgs.len(), n);
        let fid = input.overlap(&out).unwrap().norm();
        assert!((fid - 1.0).abs() < 1e-10, "seed {seed}: {fid}");
    }
}

#[test]
fn teleport_bits_are_uniform() {
    let input = random_state(1, 5);
    let mut counts = [0usize; 4];
    let mut rng = rng_from(99);
    let trials = 4000;
    for _ in 0..trials {
        let mut pairs = prepare_bell_pairs(1).unwrap();
        let (_, msgs) =
            teleport_register(&input, &mut pairs[..1], &NoiseModel::none(), &mut rng).unwrap();
        counts[(msgs[0].data_bit * 2 + msgs[0].entangled_bit) as usize] += 1;
    }
    let sigma = (trials as f64 * 0.25 * 0.75).sqrt();
    for c in counts {
        assert!(
            (c as f64 - trials as f64 / 4.0).abs() < 4.0 * sigma,
            "{counts:?}"
        );
    }
}

#[test]
fn reused_pair_is_rejected() {
    let mut pairs = prepare_bell_pairs(1).unwrap();
    let s = StateVector::new(1).unwrap();
    teleport_register(&s, &mut pairs[..1], &NoiseModel::none(), &mut rng_from(0)).unwrap();
    assert!(matches!(
        teleport_register(&s, &mut pairs[..1], &NoiseModel::none(), &mut rng_from(0)),
        Err(dqk_core::Error::Protocol(_))
    ));
}

#[test]
fn swap_test_probabilities() {
    let zero = StateVector::new(1).unwrap();
    let one = StateVector::from_real(&[0.0, 1.0]).unwrap();
    let plus = StateVector::from_real(&[std::f64::consts::FRAC_1_SQRT_2; 2]).unwrap();
    assert!((swap_test_probability(&zero, &zero).unwrap() - 1.0).abs() < 1e-12);
    assert!((swap_test_probability(&zero, &one).unwrap() - 0.5).abs() < 1e-12);
    assert!((swap_test_probability(&zero, &plus).unwrap() - 0.75).abs() < 1e-12);
    assert!(swap_test_probability(&zero, &StateVector::new(2).unwrap()).is_err());
    let mut rng = rng_from(3);
    for _ in 0..100 {
        assert_eq!(
            swap_test(&plus, &plus, &NoiseModel::none(), &mut rng).unwrap(),
            0
        );
    }
}

#[test]
fn overlap_estimator_arithmetic() {
    let bits = |zeros: usize, ones: usize| {
        let mut v = vec![0u8; zeros];
        v.extend(std::iter::repeat_n(1u8, ones));
        v
    };
    assert_eq!(estimate_overlap(&bits(1024, 0)).unwrap(), 1.0);
    assert_eq!(estimate_overlap(&bits(768, 256)).unwrap(), 0.5);
    assert_eq!(estimate_overlap(&bits(400, 624)).unwrap(), -0.21875);
    assert!(estimate_overlap(&[]).is_err());
}

#[test]
fn identical_points_estimate_one() {
    let x = [0.3, 0.1, 0.9, 0.4];
    let spec = FeatureMapSpec::linear(4);
    let cfg = SessionConfig::new(2, 1024);
    let t = run_session(&x, &x, &spec, &cfg, 0, 7).unwrap();
    assert_eq!(t.estimate, 1.0);
    assert_eq!(t.zeros, 1024);
    assert!((t.ancilla_p0.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn transcript_shape_and_determinism() {
    let mut rng = rng_from(4);
    let (a, b) = (random_point(8, &mut rng), random_point(8, &mut rng));
    let mut cfg = SessionConfig::new(3, 300);
    cfg.engine = ShotEngine::Trajectory;
    cfg.shared_seed = 11;
    let t1 = run_session_encoded(&a, &b, &cfg, 5, 1234).unwrap();
    let mut analytic = cfg;
    analytic.engine = ShotEngine::Channel;
    let t3 = run_session_encoded(&a, &b, &analytic, 5, 1234).unwrap();
    assert!((t3.ancilla_p0.unwrap() - t1.ancilla_p0.unwrap()).abs() < 1e-12);
    assert_eq!(t3.peak_qubits, 0);
    let t2 = run_session_encoded(&a, &b, &cfg, 5, 1234).unwrap();
    assert_eq!(t1, t2);
    assert_eq!(t1.shots.len(), 300);
    assert_eq!(t1.messages.len(), 6);
    assert_eq!(
        t1.messages
            .iter()
            .filter(|m| m.sender == PartyId::ClientA)
            .count(),
        3
    );
    assert_eq!(
        t1.messages
            .iter()
            .filter(|m| m.sender == PartyId::ClientB)
            .count(),
        3
    );
    assert!(t1.peak_qubits <= 2 * 3 + 3);
    assert_eq!(t1.norm_factors, (a.norm_factor, b.norm_factor));

    let mut noisy = cfg;
    noisy.noise = NoiseModel::level2();
    let n1 = run_session_encoded(&a, &b, &noisy, 5, 1234).unwrap();
    assert_eq!(n1, run_session_encoded(&a, &b, &noisy, 5, 1234).unwrap());
    assert_eq!(n1.messages.len(), 6);
    assert_eq!(n1.shots.len(), 300);
}

#[test]
fn capacity_limits_by_mode() {
    let mut cfg = SessionConfig::new(7, 10);
    assert!(cfg.validate().is_ok());
    assert_eq!(cfg.required_qubits(), 17);
    cfg.mode = ExecutionMode::FullCircuit;
    assert_eq!(cfg.required_qubits(), 43);
    assert!(matches!(
        cfg.validate(),
        Err(dqk_core::Error::Capacity { .. })
    ));
}

#[test]
fn full_circuit_uses_six_n_plus_one_qubits() {
    let mut rng = rng_from(8);
    let (a, b) = (random_point(4, &mut rng), random_point(4, &mut rng));
    let mut cfg = SessionConfig::new(2, 16);
    cfg.engine = ShotEngine::Trajectory;
    cfg.mode = ExecutionMode::FullCircuit;
    let t = run_session_encoded(&a, &b, &cfg, 0, 1).unwrap();
    assert_eq!(t.peak_qubits, 13);
    cfg.mode = ExecutionMode::Streaming;
    let t = run_session_encoded(&a, &b, &cfg, 0, 1).unwrap();
    assert_eq!(t.peak_qubits, 7);
}

#[test]
fn modes_agree_in_distribution() {
    let mut rng = rng_from(21);
    let (a, b) = (random_point(4, &mut rng), random_point(4, &mut rng));
    let mut cfg = SessionConfig::new(2, 4096);
    cfg.engine = ShotEngine::Trajectory;
    let s = run_session_encoded(&a, &b, &cfg, 0, 10).unwrap();
    cfg.mode = ExecutionMode::FullCircuit;
    let f = run_session_encoded(&a, &b, &cfg, 0, 20).unwrap();
    let (ps, pf) = (s.zeros as f64 / 4096.0, f.zeros as f64 / 4096.0);
    // total variation distance between two Bernoulli distributions
    assert!((ps - pf).abs() <= 0.05);
    assert!((s.ancilla_p0.unwrap() - f.ancilla_p0.unwrap()).abs() < 1e-9);
}

#[test]
fn obfuscation_is_transparent() {
    let mut rng = rng_from(6);
    for i in 0..10 {
        let (a, b) = (random_point(8, &mut rng), random_point(8, &mut rng));
        let mut cfg = SessionConfig::new(3, 8);
        cfg.engine = ShotEngine::Trajectory;
        cfg.shared_seed = 1000 + i;
        let on = run_session_encoded(&a, &b, &cfg, i, 3).unwrap();
        cfg.obfuscate = false;
        let off = run_session_encoded(&a, &b, &cfg, i, 3).unwrap();
        assert!((on.ancilla_p0.unwrap() - off.ancilla_p0.unwrap()).abs() < 1e-12);
    }
}

#[test]
fn estimates_converge_with_shots() {
    let mut rng = rng_from(12);
    let pairs: Vec<_> = (0..30)
        .map(|_| (random_point(4, &mut rng), random_point(4, &mut rng)))
        .collect();
    let mut errs = Vec::new();
    for p in [128usize, 1024, 8192] {
        let cfg = SessionConfig::new(2, p);
        let mean_err: f64 = pairs
            .iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let truth = a.overlap(b).powi(2);
                (run_session_encoded(a, b, &cfg, i as u64, 500 + i as u64)
                    .unwrap()
                    .estimate
                    - truth)
                    .abs()
            })
            .sum::<f64>()
            / pairs.len() as f64;
        errs.push(mean_err);
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    // roughly 1/√p: an 8x shot increase shrinks the error by ~2.8
    assert!(
        errs[0] / errs[1] > 1.5 && errs[1] / errs[2] > 1.5,
        "{errs:?}"
    );
}

#[test]
fn frame_engine_matches_trajectory_for_fixed_errors() {
    let n = 2;
    let a = random_state(n, 31);
    let b = random_state(n, 32);
    let paulis = [Pauli::X, Pauli::Y, Pauli::Z];
    let mut pick = rng_from(77);
    for trial in 0..200 {
        let mut script = HashMap::new();
        for id in 0..2 * n {
            for site in [NoiseSite::BellH(id), NoiseSite::ClientH(id)] {
                if pick.gen::<f64>() < 0.3 {
                    script.insert(site, vec![paulis[pick.gen_range(0..3)]]);
                }
            }
            for site in [NoiseSite::BellCx(id), NoiseSite::ClientCx(id)] {
                if pick.gen::<f64>() < 0.3 {
                    let code = pick.gen_range(1..16usize);
                    script.insert(
                        site,
                        vec![Pauli::from_index(code), Pauli::from_index(code >> 2)],
                    );
                }
            }
        }
        if trial % 3 == 0 {
            script.insert(NoiseSite::SwapH1, vec![paulis[trial % 3]]);
            script.insert(NoiseSite::SwapCswap(1), vec![Pauli::X, Pauli::Z, Pauli::Y]);
        }
        let scripted = Scripted(script);
        let mut bits = Vec::new();
        let frame = frame_ancilla_probability(
            &a,
            &b,
            &mut scripted.clone(),
            &mut rng_from(trial as u64),
            &mut bits,
        )
        .unwrap();
        for mode in [ExecutionMode::Streaming, ExecutionMode::FullCircuit] {
            let traj = execute_circuit(
                &a,
                &b,
                mode,
                26,
                false,
                &mut rng_from(1000 + trial as u64),
                &mut scripted.clone(),
            )
            .unwrap()
            .p0;
            assert!(
                (frame - traj).abs() < 1e-10,
                "trial {trial}: {frame} vs {traj}"
            );
        }
    }
}

#[test]
fn frame_engine_matches_trajectory_statistically() {
    let n = 2;
    let a = random_state(n, 41);
    let b = random_state(n, 42);
    let model = NoiseModel::custom(0.15, 0.15).unwrap();
    let trials = 6000;
    let mut frame_sum = 0.0;
    let mut traj_sum = 0.0;
    let mut frame_src = Depolarizing {
        model,
        rng: rng_from(1),
    };
    let mut traj_src = Depolarizing {
        model,
        rng: rng_from(2),
    };
    let mut frng = rng_from(3);
    let mut trng = rng_from(4);
    let mut bits = Vec::new();
    for _ in 0..trials {
        frame_sum +=
            frame_ancilla_probability(&a, &b, &mut frame_src, &mut frng, &mut bits).unwrap();
        traj_sum += execute_circuit(
            &a,
            &b,
            ExecutionMode::Streaming,
            26,
            false,
            &mut trng,
            &mut traj_src,
        )
        .unwrap()
        .p0;
    }
    let clean = swap_test_probability(&a, &b).unwrap();
    let (fm, tm) = (frame_sum / trials as f64, traj_sum / trials as f64);
    // per-shot P(0) lies in [0, 1]; its sd is at most 0.5
    let tol = 4.0 * 0.5 * (2.0 / trials as f64).sqrt();
    assert!((fm - tm).abs() < tol, "frame {fm} traj {tm}");
    assert!(
        (clean - tm).abs() > tol,
        "noise should be visible: {clean} vs {tm}"
    );
}

#[test]
fn decoys_pass_without_adversary() {
    let cfg = SessionConfig::new(4, 1);
    for s in 0..50 {
        assert!(run_decoy_session(&cfg, s, s * 7).unwrap().passed);
    }
}

#[test]
fn decoys_catch_intercept_resend() {
    let mut cfg = SessionConfig::new(4, 1);
    cfg.adversary = true;
    cfg.shared_seed = 5;
    let sessions = 500;
    let failed = (0..sessions)
        .filter(|&s| !run_decoy_session(&cfg, s, 10_000 + s).unwrap().passed)
        .count();
    let rate = failed as f64 / sessions as f64;
    let bound = decoy_detection_probability(4);
    let sigma = (bound * (1.0 - bound) / sessions as f64).sqrt();
    assert!(
        (rate - bound).abs() < 4.0 * sigma,
        "rate {rate}, bound {bound}"
    );
}

#[test]
fn decoy_false_alarms_under_noise_are_reported() {
    let mut cfg = SessionConfig::new(4, 1);
    cfg.noise = NoiseModel::level2();
    let sessions = 300;
    let failed = (0..sessions)
        .filter(|&s| !run_decoy_session(&cfg, s, s).unwrap().passed)
        .count();
    println!(
        "decoy false-alarm rate at noise level 2: {:.4}",
        failed as f64 / sessions as f64
    );
    assert!((failed as u64) < sessions);
}

#[test]
fn adversary_degrades_estimates() {
    let mut rng = rng_from(55);
    let mut clean_err = 0.0;
    let mut tampered_err = 0.0;
    for i in 0..50u64 {
        let (a, b) = (random_point(4, &mut rng), random_point(4, &mut rng));
        let truth = a.overlap(&b).powi(2);
        let mut cfg = SessionConfig::new(2, 256);
        let clean = run_session_encoded(&a, &b, &cfg, i, i).unwrap();
        cfg.adversary = true;
        let tampered = run_session_encoded(&a, &b, &cfg, i, i).unwrap();
        assert_eq!(tampered.intercepted, 256 * 4);
        clean_err += (clean.estimate - truth).abs();
        tampered_err += (tampered.estimate - truth).abs();
    }
    assert!(tampered_err > clean_err, "{tampered_err} vs {clean_err}");
}

#[test]
fn disabled_adversary_is_a_no_op() {
    let x = [0.2, 0.4, 0.6, 0.1];
    let y = [0.5, 0.5, 0.1, 0.9];
    let spec = FeatureMapSpec::linear(4);
    let cfg = SessionConfig::new(2, 128);
    let mut off = cfg;
    off.adversary = false;
    assert_eq!(
        run_session(&x, &y, &spec, &cfg, 3, 9).unwrap(),
        run_session(&x, &y, &spec, &off, 3, 9).unwrap()
    );
}

#[test]
fn transcript_records_serialize_one_per_line() {
    let x = [0.2, 0.4, 0.6, 0.1];
    let spec = FeatureMapSpec::linear(4);
    let mut cfg = SessionConfig::new(2, 64);
    cfg.decoy = true;
    let t = run_session(&x, &x, &spec, &cfg, 1, 2).unwrap();
    assert_eq!(t.decoy_verdict, Some(true));
    let buf = std::sync::Arc::new(std::sync::Mutex::new(Vec::<u8>::new()));
    struct Shared(std::sync::Arc<std::sync::Mutex<Vec<u8>>>);
    impl std::io::Write for Shared {
        fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().write(b)
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }
    let sink = TranscriptSink::from_writer(Box::new(Shared(buf.clone())));
    sink.append(&t).unwrap();
    sink.append(&t).unwrap();
    sink.flush().unwrap();
    let text = String::from_utf8(buf.lock().unwrap().clone()).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let rec: TranscriptRecord = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(rec.bits_a.len(), 4);
    assert_eq!(rec.zeros + rec.ones, 64);
    assert_eq!(rec.decoy_verdict, Some(true));
}

struct TeleportOnly(Depolarizing);

impl ErrorSource for TeleportOnly {
    fn sample(&mut self, site: NoiseSite, arity: usize) -> Option<Vec<Pauli>> {
        match site {
            NoiseSite::SwapH1 | NoiseSite::SwapCswap(_) | NoiseSite::SwapH2 => None,
            _ => self.0.sample(site, arity),
        }
    }
}

#[test]
fn noiseless_channel_is_identity() {
    assert_eq!(teleport_channel(&NoiseModel::none()), [1.0, 0.0, 0.0, 0.0]);
    let (a, b) = (random_state(3, 1), random_state(3, 2));
    let p = channel_clean_swap_probability(&a, &b, &[1.0, 0.0, 0.0, 0.0]).unwrap();
    assert!((p - swap_test_probability(&a, &b).unwrap()).abs() < 1e-12);
    let ch = teleport_channel(&NoiseModel::level2());
    assert!((ch.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(swap_error_free_probability(&NoiseModel::none(), 4), 1.0);
}

#[test]
fn channel_mean_matches_sampled_frames() {
    let (a, b) = (random_state(2, 61), random_state(2, 62));
    let model = NoiseModel::custom(0.1, 0.1).unwrap();
    let exact = channel_clean_swap_probability(&a, &b, &teleport_channel(&model)).unwrap();
    let trials = 20000;
    let mut src = TeleportOnly(Depolarizing {
        model,
        rng: rng_from(5),
    });
    let mut rng = rng_from(6);
    let mut bits = Vec::new();
    let samples: Vec<f64> = (0..trials)
        .map(|_| frame_ancilla_probability(&a, &b, &mut src, &mut rng, &mut bits).unwrap())
        .collect();
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    assert!(
        (mean - exact).abs() < 4.0 * (var / trials as f64).sqrt() + 1e-12,
        "{mean} vs {exact}"
    );
    assert!((exact - swap_test_probability(&a, &b).unwrap()).abs() > 0.01);
}

#[test]
fn channel_engine_matches_trajectories() {
    let mut rng = rng_from(71);
    let (a, b) = (random_point(4, &mut rng), random_point(4, &mut rng));
    let mut cfg = SessionConfig::new(2, 20000);
    cfg.noise = NoiseModel::custom(0.08, 0.08).unwrap();
    cfg.obfuscate = false;
    let chan = run_session_encoded(&a, &b, &cfg, 0, 1).unwrap();
    cfg.engine = ShotEngine::Trajectory;
    let traj = run_session_encoded(&a, &b, &cfg, 0, 2).unwrap();
    let (pc, pt) = (chan.zeros as f64 / 20000.0, traj.zeros as f64 / 20000.0);
    let sigma = (0.25 * 2.0 / 20000.0f64).sqrt();
    assert!((pc - pt).abs() < 4.0 * sigma, "{pc} vs {pt}");
    assert_eq!(chan.messages.len(), 4);
}
