//! Per-muscle EEG classifiers trained on EMG-derived segment labels, and
//! the estimated activation pattern they produce for a trial.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::csp::{extract_features, segment_scatters, Scatter, SpatialFilterModel};
use crate::emg::{build_pattern, ActivationPattern, PatternLibrary, ThresholdPolicy, DEFAULT_MUSCLE_CHANNELS};
use crate::error::{Error, Result};
use crate::filter::{design_highpass, design_notch, DesignedFilterBank, FilterBankSpec, DEFAULT_NOTCH_QUALITY};
use crate::lda::{fit_lda_with, LdaModel, Priors};
use crate::matching::MatchMode;
use crate::signal::{Paradigm, SignalEpoch, Trial, WindowSpec};

/// How the EEG-side pattern is formed before matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EstimateMode {
    /// Hard 0/1 decisions per segment.
    #[default]
    Hard,
    /// LDA posteriors in [0, 1] (experimental).
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub window: WindowSpec,
    pub filter_bank: FilterBankSpec,
    pub policy: ThresholdPolicy,
    pub m_pairs: usize,
    pub gamma: f64,
    pub shrinkage: f64,
    pub priors: Priors,
    /// Optional EMG high-pass cutoff applied before RMS; off by default.
    pub emg_highpass_hz: Option<f64>,
    pub match_mode: MatchMode,
    pub estimate_mode: EstimateMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec::default(),
            filter_bank: FilterBankSpec::default(),
            policy: ThresholdPolicy::default(),
            m_pairs: 2,
            gamma: 0.0,
            shrinkage: 0.05,
            priors: Priors::Equal,
            emg_highpass_hz: None,
            match_mode: MatchMode::MeanMse,
            estimate_mode: EstimateMode::Hard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelClassifier {
    pub emg_channel_index: usize,
    pub lda: LdaModel,
    pub spatial: SpatialFilterModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub channel_classifiers: Vec<ChannelClassifier>,
    pub window: WindowSpec,
    pub library: PatternLibrary,
    pub trained_on: Paradigm,
    pub config: PipelineConfig,
    /// Every trial that contributed to the classifiers or the library.
    pub training_trial_ids: Vec<String>,
}

/// Segment scatters of a trial's EEG, indexed `[segment][band]`.
pub(crate) fn eeg_segment_scatters(eeg: &SignalEpoch, bank: &DesignedFilterBank, window: &WindowSpec) -> Result<Vec<Vec<Scatter>>> {
    let ranges = window.sample_ranges(eeg.n_samples(), eeg.sample_rate_hz())?;
    let bands = bank.apply(eeg)?;
    let mut per_band: Vec<std::vec::IntoIter<Scatter>> = bands
        .iter()
        .map(|b| segment_scatters(b, &ranges).into_iter())
        .collect();
    Ok((0..ranges.len())
        .map(|_| per_band.iter_mut().map(|it| it.next().expect("one scatter per segment")).collect())
        .collect())
}

/// EMG conditioning applied before RMS: the filter bank's notch, then the optional high-pass.
pub fn preprocess_emg(emg: &SignalEpoch, config: &PipelineConfig) -> Result<SignalEpoch> {
    let fs = emg.sample_rate_hz();
    let mut filters = Vec::new();
    if let Some(f) = config.filter_bank.notch_hz {
        filters.push(design_notch(f, DEFAULT_NOTCH_QUALITY, fs)?);
    }
    if let Some(f) = config.emg_highpass_hz {
        filters.push(design_highpass(f, 4, fs)?);
    }
    if filters.is_empty() {
        return Ok(emg.clone());
    }
    emg.map_channels(|ch| {
        let mut out = ch.to_vec();
        for f in &filters {
            out = f.filtfilt(&out);
        }
        Ok(out)
    })
}

/// EMG activation pattern of a movement trial under `config`.
pub fn emg_pattern(trial: &Trial, config: &PipelineConfig) -> Result<ActivationPattern> {
    let emg = trial.emg.as_ref().ok_or_else(|| Error::MissingEmg(trial.id.clone()))?;
    let conditioned = Trial {
        emg: Some(preprocess_emg(emg, config)?),
        ..trial.clone()
    };
    build_pattern(&conditioned, &config.window, &config.policy)
}

fn common_sample_rate(trials: &[Trial]) -> Result<f64> {
    let fs = trials.first().ok_or(Error::EmptyInput)?.eeg.sample_rate_hz();
    if let Some(t) = trials.iter().find(|t| t.eeg.sample_rate_hz() != fs) {
        return Err(Error::DimensionMismatch(format!(
            "trial {} sampled at {} Hz, expected {fs} Hz",
            t.id,
            t.eeg.sample_rate_hz()
        )));
    }
    Ok(fs)
}

fn check_training_trial(t: &Trial) -> Result<()> {
    if t.paradigm != Paradigm::ActualMovement {
        return Err(Error::InvalidParameter(format!(
            "trial {} is not an actual-movement trial",
            t.id
        )));
    }
    if t.emg.is_none() {
        return Err(Error::MissingEmg(t.id.clone()));
    }
    Ok(())
}

/// Fits classifiers for `channels` given each trial's EMG pattern.
fn fit_channel_classifiers(
    trials: &[Trial],
    patterns: &[ActivationPattern],
    channels: &[usize],
    config: &PipelineConfig,
) -> Result<Vec<ChannelClassifier>> {
    let fs = common_sample_rate(trials)?;
    let bank = config.filter_bank.design(fs)?;
    let n_bands = bank.bands.len();
    let n_eeg = trials[0].eeg.n_channels();

    // pass 1: per channel, per label, per band sums of normalised scatters
    let mut sums = vec![[vec![DMatrix::<f64>::zeros(n_eeg, n_eeg); n_bands], vec![DMatrix::<f64>::zeros(n_eeg, n_eeg); n_bands]]; channels.len()];
    let mut counts = vec![[0usize; 2]; channels.len()];
    for (trial, pattern) in trials.iter().zip(patterns) {
        if trial.eeg.n_channels() != n_eeg {
            return Err(Error::DimensionMismatch(format!(
                "trial {} has {} EEG channels, expected {n_eeg}",
                trial.id,
                trial.eeg.n_channels()
            )));
        }
        let scatters = eeg_segment_scatters(&trial.eeg, &bank, &config.window)?;
        if scatters.len() != pattern.n_segments() {
            return Err(Error::DimensionMismatch(format!(
                "trial {}: {} EEG segments but {} EMG segments",
                trial.id,
                scatters.len(),
                pattern.n_segments()
            )));
        }
        let normalized = scatters
            .iter()
            .map(|seg| seg.iter().map(Scatter::normalized).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        for (k, &c) in channels.iter().enumerate() {
            for (s, seg) in normalized.iter().enumerate() {
                let label = pattern.get(c, s) as usize;
                counts[k][label] += 1;
                for (acc, cov) in sums[k][label].iter_mut().zip(seg) {
                    *acc += cov;
                }
            }
        }
    }

    let mut spatial = Vec::with_capacity(channels.len());
    for k in 0..channels.len() {
        let [rest_n, active_n] = counts[k];
        if rest_n == 0 || active_n == 0 {
            return Err(Error::SingleClassInput);
        }
        let [rest, active] = &sums[k];
        let class_covs: Vec<_> = active
            .iter()
            .zip(rest)
            .map(|(a, r)| (a / active_n as f64, r / rest_n as f64))
            .collect();
        spatial.push(SpatialFilterModel::fit(&class_covs, config.filter_bank.clone(), config.m_pairs, config.gamma)?);
    }

    // pass 2: features under each channel's own CSP
    let mut features: Vec<Vec<Vec<f64>>> = vec![Vec::new(); channels.len()];
    let mut labels: Vec<Vec<bool>> = vec![Vec::new(); channels.len()];
    for (trial, pattern) in trials.iter().zip(patterns) {
        let scatters = eeg_segment_scatters(&trial.eeg, &bank, &config.window)?;
        for (s, seg) in scatters.iter().enumerate() {
            let refs: Vec<&Scatter> = seg.iter().collect();
            for (k, &c) in channels.iter().enumerate() {
                features[k].push(spatial[k].features_from_scatters(&refs)?);
                labels[k].push(pattern.get(c, s) == 1);
            }
        }
    }

    channels
        .iter()
        .zip(spatial)
        .enumerate()
        .map(|(k, (&c, sp))| {
            Ok(ChannelClassifier {
                emg_channel_index: c,
                lda: fit_lda_with(&features[k], &labels[k], config.shrinkage, config.priors)?,
                spatial: sp,
            })
        })
        .collect()
}

/// Trains the classifier for one EMG channel on actual-movement trials.
pub fn train_channel_classifier(trials: &[Trial], channel: usize, config: &PipelineConfig) -> Result<ChannelClassifier> {
    if channel >= DEFAULT_MUSCLE_CHANNELS {
        return Err(Error::InvalidParameter(format!("EMG channel {channel} out of range")));
    }
    trials.iter().try_for_each(check_training_trial)?;
    let patterns = trials.iter().map(|t| emg_pattern(t, config)).collect::<Result<Vec<_>>>()?;
    let mut out = fit_channel_classifiers(trials, &patterns, &[channel], config)?;
    Ok(out.remove(0))
}

/// Builds the EMG pattern library and all six channel classifiers.
pub fn train_pipeline(trials: &[Trial], config: &PipelineConfig) -> Result<PipelineModel> {
    if trials.is_empty() {
        return Err(Error::InsufficientData("no training trials".into()));
    }
    trials.iter().try_for_each(check_training_trial)?;
    let patterns = trials.iter().map(|t| emg_pattern(t, config)).collect::<Result<Vec<_>>>()?;
    let mut library = PatternLibrary::empty(config.window, DEFAULT_MUSCLE_CHANNELS);
    for p in &patterns {
        library.insert(p.clone())?;
    }
    let channels: Vec<usize> = (0..DEFAULT_MUSCLE_CHANNELS).collect();
    let channel_classifiers = fit_channel_classifiers(trials, &patterns, &channels, config)?;
    Ok(PipelineModel {
        channel_classifiers,
        window: config.window,
        library,
        trained_on: Paradigm::ActualMovement,
        config: config.clone(),
        training_trial_ids: trials.iter().map(|t| t.id.clone()).collect(),
    })
}

/// 1 iff the channel's LDA score on this segment is strictly positive.
pub fn predict_segment(clf: &ChannelClassifier, eeg_segment_per_band: &[SignalEpoch]) -> Result<u8> {
    let f = extract_features(&clf.spatial, eeg_segment_per_band)?;
    Ok(u8::from(clf.lda.try_score(&f.values)? > 0.0))
}

/// LDA scores `[channel][segment]` for a trial's EEG. EMG is never read.
pub fn segment_scores(model: &PipelineModel, trial: &Trial) -> Result<Vec<Vec<f64>>> {
    let expected = model
        .channel_classifiers
        .first()
        .and_then(|c| c.spatial.per_band.first())
        .map(|b| b.n_channels())
        .ok_or_else(|| Error::InvalidParameter("model has no channel classifiers".into()))?;
    if trial.eeg.n_channels() != expected {
        return Err(Error::DimensionMismatch(format!(
            "trial {} has {} EEG channels, model expects {expected}",
            trial.id,
            trial.eeg.n_channels()
        )));
    }
    let bank = model.config.filter_bank.design(trial.eeg.sample_rate_hz())?;
    let scatters = eeg_segment_scatters(&trial.eeg, &bank, &model.window)?;
    if scatters.len() != model.window.expected_segments {
        return Err(Error::DimensionMismatch(format!(
            "trial {} yields {} segments, model expects {}",
            trial.id,
            scatters.len(),
            model.window.expected_segments
        )));
    }
    let mut out = vec![Vec::with_capacity(scatters.len()); model.channel_classifiers.len()];
    for seg in &scatters {
        let refs: Vec<&Scatter> = seg.iter().collect();
        for (row, clf) in out.iter_mut().zip(&model.channel_classifiers) {
            let f = clf.spatial.features_from_scatters(&refs)?;
            row.push(clf.lda.try_score(&f)?);
        }
    }
    Ok(out)
}

/// Hard-decision activation pattern estimated from EEG alone.
pub fn estimate_pattern(model: &PipelineModel, trial: &Trial) -> Result<ActivationPattern> {
    let scores = segment_scores(model, trial)?;
    let rows: Vec<Vec<u8>> = scores
        .iter()
        .map(|r| r.iter().map(|s| u8::from(*s > 0.0)).collect())
        .collect();
    Ok(ActivationPattern::from_rows(&rows)?.with_trial(trial.id.clone(), trial.class_label))
}

/// LDA posteriors `[channel][segment]`, for soft matching.
pub fn estimate_soft_pattern(model: &PipelineModel, trial: &Trial) -> Result<Vec<Vec<f64>>> {
    Ok(segment_scores(model, trial)?
        .into_iter()
        .map(|r| r.into_iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect())
        .collect())
}
