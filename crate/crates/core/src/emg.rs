//! EMG decoding: segment RMS against a per-trial threshold gives one binary
//! row per muscle; six rows make a trial's activation pattern.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{GraspClass, Paradigm, Trial, WindowSpec};

pub const DEFAULT_MUSCLE_CHANNELS: usize = 6;

/// Binary muscle-activation image, row-major `n_channels x n_segments`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationPattern {
    n_channels: usize,
    n_segments: usize,
    values: Vec<u8>,
    pub trial_id: String,
    pub class_label: Option<GraspClass>,
}

impl ActivationPattern {
    pub fn new(n_channels: usize, n_segments: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != n_channels * n_segments {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n_channels}x{n_segments} pattern",
                values.len()
            )));
        }
        if values.iter().any(|v| *v > 1) {
            return Err(Error::InvalidParameter("pattern entries must be 0 or 1".into()));
        }
        Ok(Self {
            n_channels,
            n_segments,
            values,
            trial_id: String::new(),
            class_label: None,
        })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n_segments = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_segments) {
            return Err(Error::DimensionMismatch("pattern rows have unequal lengths".into()));
        }
        Self::new(rows.len(), n_segments, rows.concat())
    }

    pub fn zeros(n_channels: usize, n_segments: usize) -> Self {
        Self::new(n_channels, n_segments, vec![0; n_channels * n_segments]).expect("consistent shape")
    }

    pub fn with_trial(mut self, trial_id: impl Into<String>, class_label: Option<GraspClass>) -> Self {
        self.trial_id = trial_id.into();
        self.class_label = class_label;
        self
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, channel: usize, segment: usize) -> u8 {
        self.values[channel * self.n_segments + segment]
    }

    pub fn row(&self, channel: usize) -> &[u8] {
        &self.values[channel * self.n_segments..(channel + 1) * self.n_segments]
    }

    pub fn ones(&self) -> usize {
        self.values.iter().map(|v| *v as usize).sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_channels == other.n_channels && self.n_segments == other.n_segments
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdSource {
    PerTrialMeanRms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub scale: f64,
    pub source: ThresholdSource,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self {
            scale: 1.0,
            source: ThresholdSource::PerTrialMeanRms,
        }
    }
}

impl ThresholdPolicy {
    pub fn with_scale(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("threshold scale {scale} must be positive")));
        }
        Ok(Self {
            scale,
            ..Self::default()
        })
    }
}

pub fn rms(segment: &[f64]) -> Result<f64> {
    if segment.is_empty() {
        return Err(Error::EmptySegment);
    }
    let ms = segment.iter().map(|v| v * v).sum::<f64>() / segment.len() as f64;
    Ok(ms.sqrt())
}

fn segment_rms(channel: &[f64], sample_rate_hz: f64, window: &WindowSpec) -> Result<Vec<f64>> {
    window
        .sample_ranges(channel.len(), sample_rate_hz)?
        .into_iter()
        .map(|r| rms(&channel[r]))
        .collect()
}

fn threshold_from(rms_values: &[f64], policy: &ThresholdPolicy) -> Result<f64> {
    if rms_values.is_empty() {
        return Err(Error::EmptySegment);
    }
    match policy.source {
        ThresholdSource::PerTrialMeanRms => {
            Ok(policy.scale * rms_values.iter().sum::<f64>() / rms_values.len() as f64)
        }
    }
}

/// Mean segment RMS over the whole trial, times the policy scale.
pub fn trial_threshold(channel: &[f64], sample_rate_hz: f64, window: &WindowSpec, policy: &ThresholdPolicy) -> Result<f64> {
    threshold_from(&segment_rms(channel, sample_rate_hz, window)?, policy)
}

/// One decode row: entry `t` is 1 iff segment `t` RMS strictly exceeds the trial threshold.
pub fn binarize_channel(channel: &[f64], sample_rate_hz: f64, window: &WindowSpec, policy: &ThresholdPolicy) -> Result<Vec<u8>> {
    let values = segment_rms(channel, sample_rate_hz, window)?;
    let threshold = threshold_from(&values, policy)?;
    Ok(values.iter().map(|v| u8::from(*v > threshold)).collect())
}

pub fn build_pattern(trial: &Trial, window: &WindowSpec, policy: &ThresholdPolicy) -> Result<ActivationPattern> {
    let emg = trial.emg.as_ref().ok_or_else(|| Error::MissingEmg(trial.id.clone()))?;
    if emg.n_channels() != DEFAULT_MUSCLE_CHANNELS {
        return Err(Error::ChannelCountMismatch {
            expected: DEFAULT_MUSCLE_CHANNELS,
            found: emg.n_channels(),
        });
    }
    let rows = emg
        .channels()
        .map(|ch| binarize_channel(ch, emg.sample_rate_hz(), window, policy))
        .collect::<Result<Vec<_>>>()?;
    Ok(ActivationPattern::from_rows(&rows)?.with_trial(trial.id.clone(), trial.class_label))
}

/// EMG-derived patterns grouped by grasp class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternLibrary {
    pub patterns_by_class: BTreeMap<GraspClass, Vec<ActivationPattern>>,
    pub window: WindowSpec,
    pub n_channels: usize,
}

impl PatternLibrary {
    pub fn empty(window: WindowSpec, n_channels: usize) -> Self {
        Self {
            patterns_by_class: BTreeMap::new(),
            window,
            n_channels,
        }
    }

    pub fn insert(&mut self, pattern: ActivationPattern) -> Result<()> {
        let class = pattern.class_label.ok_or_else(|| Error::UnlabeledTrial(pattern.trial_id.clone()))?;
        if pattern.n_channels() != self.n_channels || pattern.n_segments() != self.window.expected_segments {
            return Err(Error::DimensionMismatch(format!(
                "pattern {} is {}x{}, library holds {}x{}",
                pattern.trial_id,
                pattern.n_channels(),
                pattern.n_segments(),
                self.n_channels,
                self.window.expected_segments
            )));
        }
        self.patterns_by_class.entry(class).or_default().push(pattern);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.patterns_by_class.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, class: GraspClass) -> usize {
        self.patterns_by_class.get(&class).map_or(0, Vec::len)
    }

    pub fn iter(&self) -> impl Iterator<Item = (GraspClass, &ActivationPattern)> {
        self.patterns_by_class
            .iter()
            .flat_map(|(c, ps)| ps.iter().map(move |p| (*c, p)))
    }

    pub fn trial_ids(&self) -> impl Iterator<Item = &str> {
        self.iter().map(|(_, p)| p.trial_id.as_str())
    }
}

pub fn build_library(trials: &[Trial], window: &WindowSpec, policy: &ThresholdPolicy) -> Result<PatternLibrary> {
    let mut library = PatternLibrary::empty(*window, DEFAULT_MUSCLE_CHANNELS);
    for trial in trials {
        if trial.class_label.is_none() {
            return Err(Error::UnlabeledTrial(trial.id.clone()));
        }
        if trial.paradigm != Paradigm::ActualMovement {
            return Err(Error::InvalidParameter(format!(
                "trial {} is not an actual-movement trial",
                trial.id
            )));
        }
        library.insert(build_pattern(trial, window, policy)?)?;
    }
    Ok(library)
}
