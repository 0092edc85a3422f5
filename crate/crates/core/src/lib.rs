//! Grasp-action decoding from EEG through estimated muscle-activation
//! patterns.
//!
//! The proposed method learns, for each of six arm muscles, an EEG
//! classifier (filter-bank CSP features + LDA) that predicts whether the
//! muscle is active in each sliding window of a trial. The predicted 6×30
//! binary pattern is matched by mean-squared error against a library of
//! EMG-derived patterns, and the closest class wins. Two direct CSP + LDA
//! classifiers are included for comparison, together with a synthetic data
//! generator, binary dataset I/O, model persistence and a cross-validation
//! harness.

pub mod baselines;
pub mod csp;
pub mod emg;
pub mod error;
pub mod eval;
pub mod filter;
pub mod io;
pub mod lda;
pub mod matching;
pub mod pipeline;
pub mod signal;
pub mod synth;

pub use baselines::{predict_baseline, train_baseline, BaselineConfig, BaselineKind, BaselineModel, MulticlassScheme};
pub use csp::{class_covariance, extract_features, fit_csp, shrink, CspModel, FeatureVector, SpatialFilterModel};
pub use emg::{
    binarize_channel, build_library, build_pattern, rms, trial_threshold, ActivationPattern, PatternLibrary,
    ThresholdPolicy, ThresholdSource,
};
pub use error::{Error, Result};
pub use eval::{
    audit_leakage, cross_validate, emit_comparison, emit_report, fit_method, mean_std, parse_report_csv, predict,
    stratified_folds, EvalConfig, EvaluationReport, Method, ReportFormat, TrialRecord,
};
pub use filter::{
    apply_filter_bank, design_bandpass, design_highpass, design_notch, notch_filter, Biquad, DesignedFilterBank,
    FilterBankSpec, FilterCoefficients,
};
pub use io::{deserialize_model, read_dataset, serialize_model, write_dataset, DatasetManifest, SavedModel};
pub use lda::{fit_lda, fit_lda_with, fit_multiclass_lda, LdaModel, MulticlassLdaModel, Priors};
pub use matching::{classify_pattern, classify_pattern_with, classify_trial, pattern_mse, MatchMode, MatchReport};
pub use pipeline::{
    estimate_pattern, predict_segment, train_channel_classifier, train_pipeline, ChannelClassifier, EstimateMode,
    PipelineConfig, PipelineModel,
};
pub use signal::{segment, GraspClass, Paradigm, SignalEpoch, Trial, WindowSpec};
pub use synth::{default_schedules, generate_dataset, generate_trial, ActivationSchedule, ClassCoding, SynthConfig};
