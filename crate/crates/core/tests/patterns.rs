//! EMG binarisation, pattern construction and MSE matching.

use grasp_decode::emg::{binarize_channel, build_library, build_pattern, ActivationPattern, PatternLibrary, ThresholdPolicy};
use grasp_decode::matching::{classify_pattern, pattern_mse};
use grasp_decode::synth::{default_schedules, generate_trial, SynthConfig};
use grasp_decode::{GraspClass, Paradigm, SignalEpoch, Trial, WindowSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn burst_in_middle_segments_is_detected() {
    // 100 ms tiles over 4 s: 40 segments; burst covers segments 10..=19.
    let w = WindowSpec::unconstrained(100.0, 100.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..1000)
        .map(|i| {
            let amp = if (250..500).contains(&i) { 10.0 } else { 1.0 };
            amp * if rng.random::<bool>() { 1.0 } else { -1.0 }
        })
        .collect();
    let row = binarize_channel(&x, 250.0, &w, &ThresholdPolicy::default()).unwrap();
    let expected: Vec<u8> = (0..40).map(|s| u8::from((10..20).contains(&s))).collect();
    assert_eq!(row, expected);
}

#[test]
fn synthetic_emg_decodes_to_the_schedule_overlap_mask() {
    // At 2500 Hz the segment RMS estimates sit far from the threshold, so
    // the decode equals the noise-free rule exactly.
    let cfg = SynthConfig {
        sample_rate_hz: 2500.0,
        eeg_channels: 6,
        jitter_ms: 0.0,
        ..SynthConfig::default()
    };
    let w = WindowSpec::default();
    for (class, schedule) in default_schedules() {
        let expected = schedule.expected_pattern(&w, cfg.sample_rate_hz, cfg.duration_ms, cfg.burst_ratio).unwrap();
        for seed in 0..3 {
            let t = generate_trial(&schedule, &cfg, Paradigm::ActualMovement, seed).unwrap();
            let p = build_pattern(&t, &w, &ThresholdPolicy::default()).unwrap();
            assert_eq!(p.values(), expected.values(), "class {class}, seed {seed}");
        }
    }
}

#[test]
fn segment_level_precision_and_recall_at_default_rate() {
    let cfg = SynthConfig::default();
    let w = WindowSpec::default();
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (_, schedule) in default_schedules() {
        let expected = schedule.expected_pattern(&w, cfg.sample_rate_hz, cfg.duration_ms, cfg.burst_ratio).unwrap();
        for seed in 0..10 {
            let t = generate_trial(&schedule, &cfg, Paradigm::ActualMovement, seed).unwrap();
            let p = build_pattern(&t, &w, &ThresholdPolicy::default()).unwrap();
            for (a, b) in p.values().iter().zip(expected.values()) {
                match (a, b) {
                    (1, 1) => tp += 1,
                    (1, 0) => fp += 1,
                    (0, 1) => fn_ += 1,
                    _ => {}
                }
            }
        }
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    assert!(precision >= 0.95 && recall >= 0.95, "precision {precision}, recall {recall}");
}

#[test]
fn library_groups_patterns_by_class() {
    let cfg = SynthConfig::default();
    let trials: Vec<Trial> = default_schedules()
        .values()
        .flat_map(|s| (0..2).map(|i| generate_trial(s, &cfg, Paradigm::ActualMovement, i).unwrap()).collect::<Vec<_>>())
        .collect();
    let lib = build_library(&trials, &WindowSpec::default(), &ThresholdPolicy::default()).unwrap();
    assert_eq!(lib.len(), 6);
    for c in GraspClass::ALL {
        assert_eq!(lib.count(c), 2);
    }
    // a library pattern matched against its own library resolves to its class
    for (class, p) in lib.iter() {
        assert_eq!(classify_pattern(p, &lib).unwrap().predicted, class);
    }
    let mi = generate_trial(&default_schedules()[&GraspClass::Lateral], &cfg, Paradigm::MotorImagery, 0).unwrap();
    assert!(build_library(&[mi], &WindowSpec::default(), &ThresholdPolicy::default()).is_err());
}

#[test]
fn library_rejects_wrong_shapes() {
    let mut lib = PatternLibrary::empty(WindowSpec::default(), 6);
    let bad = ActivationPattern::zeros(6, 29).with_trial("x", Some(GraspClass::Pincer));
    assert!(lib.insert(bad).is_err());
    assert!(lib.insert(ActivationPattern::zeros(6, 30)).is_err(), "unlabelled pattern accepted");
}

fn random_pattern(seed: u64) -> ActivationPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ActivationPattern::new(6, 30, (0..180).map(|_| rng.random_range(0..2u8)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binarisation_is_invariant_to_power_of_two_gain(
        x in prop::collection::vec(-5.0f64..5.0, 1000),
        k in -8i32..8,
    ) {
        let w = WindowSpec::default();
        let p = ThresholdPolicy::default();
        let scale = 2f64.powi(k);
        let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
        prop_assert_eq!(binarize_channel(&x, 250.0, &w, &p).unwrap(), binarize_channel(&y, 250.0, &w, &p).unwrap());
    }

    #[test]
    fn mse_is_a_normalised_metric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let (pa, pb, pc) = (random_pattern(a), random_pattern(b), random_pattern(c));
        let ab = pattern_mse(&pa, &pb).unwrap();
        prop_assert_eq!(ab, pattern_mse(&pb, &pa).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(pattern_mse(&pa, &pa).unwrap(), 0.0);
        // Hamming distance obeys the triangle inequality exactly in integer counts
        let ac = (pattern_mse(&pa, &pc).unwrap() * 180.0).round();
        let cb = (pattern_mse(&pc, &pb).unwrap() * 180.0).round();
        prop_assert!((ab * 180.0).round() <= ac + cb);
    }
}

#[test]
fn emg_epoch_mismatch_is_rejected() {
    let eeg = SignalEpoch::unnamed(vec![vec![0.0; 1000]], 250.0).unwrap();
    let emg = SignalEpoch::unnamed(vec![vec![0.0; 900]; 6], 250.0).unwrap();
    assert!(Trial::new("t", eeg, Some(emg), Paradigm::ActualMovement, None).is_err());
}
