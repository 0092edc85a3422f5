//! End-to-end behaviour of the proposed pipeline, the baselines and the generator.

use grasp_decode::eval::{cross_validate, EvalConfig, Method};
use grasp_decode::matching::{classify_trial, MatchMode};
use grasp_decode::pipeline::{estimate_pattern, train_channel_classifier, train_pipeline, EstimateMode, PipelineConfig};
use grasp_decode::synth::{generate_dataset, ClassCoding, SynthConfig};
use grasp_decode::{Error, Paradigm, SignalEpoch, Trial};

fn small(n: usize, seed: u64) -> Vec<Trial> {
    generate_dataset(&SynthConfig {
        n_trials_per_class: n,
        rng_seed: seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn movement(trials: &[Trial]) -> Vec<Trial> {
    trials.iter().filter(|t| t.paradigm == Paradigm::ActualMovement).cloned().collect()
}

#[test]
fn dataset_shape_and_determinism() {
    let a = small(1, 3);
    assert_eq!(a.len(), 6);
    assert_eq!(a.iter().filter(|t| t.paradigm == Paradigm::MotorImagery).count(), 3);
    assert!(a.iter().filter(|t| t.paradigm == Paradigm::MotorImagery).all(|t| t.emg.is_none()));
    let b = small(1, 3);
    assert_eq!(a, b);
    let c = small(1, 4);
    assert_ne!(a[0].eeg, c[0].eeg);
    let ids: std::collections::BTreeSet<_> = small(4, 3).into_iter().map(|t| t.id).collect();
    assert_eq!(ids.len(), 24);
}

#[test]
fn estimated_pattern_never_reads_emg() {
    let trials = movement(&small(6, 11));
    let model = train_pipeline(&trials, &PipelineConfig::default()).unwrap();
    assert_eq!(model.library.len(), 18);
    assert_eq!(model.channel_classifiers.len(), 6);
    let t = &trials[0];
    let with = estimate_pattern(&model, t).unwrap();
    let zero_emg = SignalEpoch::unnamed(vec![vec![0.0; 1000]; 6], 250.0).unwrap();
    let altered = Trial { emg: Some(zero_emg), ..t.clone() };
    let stripped = Trial { emg: None, ..t.clone() };
    assert_eq!(estimate_pattern(&model, &altered).unwrap().values(), with.values());
    assert_eq!(estimate_pattern(&model, &stripped).unwrap().values(), with.values());
    assert_eq!((with.n_channels(), with.n_segments()), (6, 30));

    // repeated classification is identical
    assert_eq!(classify_trial(&model, t).unwrap(), classify_trial(&model, t).unwrap());
}

#[test]
fn training_input_is_validated() {
    let all = small(3, 2);
    let cfg = PipelineConfig::default();
    assert!(matches!(train_pipeline(&[], &cfg), Err(Error::InsufficientData(_))));
    assert!(train_pipeline(&all, &cfg).is_err(), "imagery trials accepted for training");
    let m = movement(&all);
    assert!(train_channel_classifier(&m, 6, &cfg).is_err());
    let clf = train_channel_classifier(&m, 2, &cfg).unwrap();
    assert_eq!(clf.emg_channel_index, 2);
    assert_eq!(clf.lda.n_features(), 17 * 4);
}

#[test]
fn alternative_matching_modes_run() {
    let trials = movement(&small(6, 12));
    for (mm, em) in [(MatchMode::NearestNeighbor, EstimateMode::Hard), (MatchMode::MeanMse, EstimateMode::Soft)] {
        let cfg = PipelineConfig {
            match_mode: mm,
            estimate_mode: em,
            ..PipelineConfig::default()
        };
        let model = train_pipeline(&trials[..15], &cfg).unwrap();
        let r = classify_trial(&model, &trials[16]).unwrap();
        assert_eq!(r.per_pattern_mse.len(), 15);
        assert!(r.per_class_mean_mse.values().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn baselines_learn_spectral_class_codes() {
    // When classes also differ in sustained band power, the direct CSP
    // classifiers must pick it up.
    let trials = generate_dataset(&SynthConfig {
        n_trials_per_class: 15,
        coding: ClassCoding::TemporalAndSpectral,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = EvalConfig::default();
    for m in [Method::ModelI, Method::ModelII] {
        let r = cross_validate(&trials, m, &cfg).unwrap();
        assert!(r.mean_accuracy > 0.8, "{m}: {}", r.mean_accuracy);
        assert!(r.leakage_violations.is_empty());
    }
}

#[test]
fn cross_validation_needs_enough_trials() {
    let trials = small(3, 5);
    let cfg = EvalConfig::default();
    assert!(matches!(cross_validate(&trials, Method::ModelI, &cfg), Err(Error::InsufficientData(_))));
}
