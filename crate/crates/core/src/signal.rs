//! Signal containers and sliding-window segmentation.
//!
//! Samples are stored channel-major: channel `c` occupies
//! `data[c * n_samples .. (c + 1) * n_samples]`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal trial length used to pin the segment count of a [`WindowSpec`].
pub const DEFAULT_TRIAL_MS: f64 = 4000.0;

const MS_EPS: f64 = 1e-9;

/// 20 motor-cortex EEG electrodes of the 10/20 montage used by the default presets.
pub const MOTOR_EEG_CHANNELS: [&str; 20] = [
    "FC1", "FC2", "FC3", "FC4", "FC5", "FC6", "C1", "C2", "C3", "C4", "C5", "C6", "Cz", "CP1", "CP2", "CP3", "CP4",
    "CP5", "CP6", "CPz",
];

/// Right-arm muscles recorded by the six EMG channels, in channel order.
pub const ARM_MUSCLES: [&str; 6] = [
    "extensor_carpi_ulnaris",
    "extensor_digitorum",
    "flexor_carpi_radialis",
    "flexor_carpi_ulnaris",
    "biceps_brachii",
    "triceps_brachii",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEpoch {
    data: Vec<f64>,
    n_channels: usize,
    n_samples: usize,
    sample_rate_hz: f64,
    channel_names: Vec<String>,
    t0_ms: f64,
}

impl SignalEpoch {
    /// Builds an epoch from channel-major samples.
    pub fn new(
        data: Vec<f64>,
        n_channels: usize,
        sample_rate_hz: f64,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::InvalidSignal("epoch needs at least one channel".into()));
        }
        if data.is_empty() || data.len() % n_channels != 0 {
            return Err(Error::InvalidSignal(format!(
                "{} samples do not divide into {} channels",
                data.len(),
                n_channels
            )));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidSignal(format!("sample rate {sample_rate_hz} must be positive")));
        }
        if channel_names.len() != n_channels {
            return Err(Error::ChannelCountMismatch {
                expected: n_channels,
                found: channel_names.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!("non-finite sample at flat index {i}")));
        }
        let n_samples = data.len() / n_channels;
        Ok(Self {
            data,
            n_channels,
            n_samples,
            sample_rate_hz,
            channel_names,
            t0_ms: 0.0,
        })
    }

    pub fn from_channels(channels: Vec<Vec<f64>>, sample_rate_hz: f64, channel_names: Vec<String>) -> Result<Self> {
        let n_channels = channels.len();
        let n_samples = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != n_samples) {
            return Err(Error::InvalidSignal("channels have unequal lengths".into()));
        }
        Self::new(channels.concat(), n_channels, sample_rate_hz, channel_names)
    }

    /// Epoch with generic channel names `ch0, ch1, ...`.
    pub fn unnamed(channels: Vec<Vec<f64>>, sample_rate_hz: f64) -> Result<Self> {
        let names = (0..channels.len()).map(|c| format!("ch{c}")).collect();
        Self::from_channels(channels, sample_rate_hz, names)
    }

    pub fn with_t0_ms(mut self, t0_ms: f64) -> Self {
        self.t0_ms = t0_ms;
        self
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn t0_ms(&self) -> f64 {
        self.t0_ms
    }

    pub fn duration_ms(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate_hz * 1000.0
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_samples)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the samples in `range` (sample indices) for every channel.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.n_samples {
            return Err(Error::InvalidSignal(format!(
                "sample range {range:?} outside 0..{}",
                self.n_samples
            )));
        }
        let mut data = Vec::with_capacity(self.n_channels * range.len());
        for ch in self.channels() {
            data.extend_from_slice(&ch[range.clone()]);
        }
        let t0 = self.t0_ms + range.start as f64 / self.sample_rate_hz * 1000.0;
        Ok(Self {
            data,
            n_channels: self.n_channels,
            n_samples: range.len(),
            sample_rate_hz: self.sample_rate_hz,
            channel_names: self.channel_names.clone(),
            t0_ms: t0,
        })
    }

    /// Applies `f` to each channel, keeping shape and metadata.
    pub fn map_channels<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut data = Vec::with_capacity(self.data.len());
        for ch in self.channels() {
            let out = f(ch)?;
            if out.len() != self.n_samples {
                return Err(Error::DimensionMismatch(format!(
                    "channel transform returned {} samples, expected {}",
                    out.len(),
                    self.n_samples
                )));
            }
            data.extend(out);
        }
        Ok(Self { data, ..self.clone() })
    }

    /// Samples as an `n_channels x n_samples` matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_channels, self.n_samples, &self.data)
    }

    pub fn from_matrix(m: &DMatrix<f64>, sample_rate_hz: f64) -> Result<Self> {
        let rows = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        Self::unnamed(rows, sample_rate_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspClass {
    Lateral,
    Pincer,
    Palmar,
}

impl GraspClass {
    pub const ALL: [GraspClass; 3] = [GraspClass::Lateral, GraspClass::Pincer, GraspClass::Palmar];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GraspClass::Lateral => "lateral",
            GraspClass::Pincer => "pincer",
            GraspClass::Palmar => "palmar",
        }
    }
}

impl fmt::Display for GraspClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraspClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lateral" => Ok(GraspClass::Lateral),
            "pincer" => Ok(GraspClass::Pincer),
            "palmar" => Ok(GraspClass::Palmar),
            other => Err(Error::InvalidParameter(format!("unknown grasp class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Paradigm {
    ActualMovement,
    MotorImagery,
}

impl Paradigm {
    pub fn as_str(self) -> &'static str {
        match self {
            Paradigm::ActualMovement => "movement",
            Paradigm::MotorImagery => "imagery",
        }
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "movement" | "actualmovement" | "actual_movement" => Ok(Paradigm::ActualMovement),
            "imagery" | "motorimagery" | "motor_imagery" => Ok(Paradigm::MotorImagery),
            other => Err(Error::InvalidParameter(format!("unknown paradigm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: String,
    pub eeg: SignalEpoch,
    pub emg: Option<SignalEpoch>,
    pub paradigm: Paradigm,
    pub class_label: Option<GraspClass>,
}

impl Trial {
    pub fn new(
        id: impl Into<String>,
        eeg: SignalEpoch,
        emg: Option<SignalEpoch>,
        paradigm: Paradigm,
        class_label: Option<GraspClass>,
    ) -> Result<Self> {
        let id = id.into();
        if let Some(emg) = &emg {
            // Durations must agree within half a sample period of the coarser epoch.
            let tol = 500.0 / eeg.sample_rate_hz().min(emg.sample_rate_hz());
            if (eeg.duration_ms() - emg.duration_ms()).abs() > tol {
                return Err(Error::InvalidSignal(format!(
                    "trial {id}: EEG lasts {} ms but EMG lasts {} ms",
                    eeg.duration_ms(),
                    emg.duration_ms()
                )));
            }
        }
        Ok(Self {
            id,
            eeg,
            emg,
            paradigm,
            class_label,
        })
    }

    pub fn duration_ms(&self) -> f64 {
        self.eeg.duration_ms()
    }
}

/// Sliding-window plan. Segment `i` covers `[i * step_ms, i * step_ms + window_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_ms: f64,
    pub step_ms: f64,
    pub expected_segments: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            window_ms: 1100.0,
            step_ms: 100.0,
            expected_segments: 30,
        }
    }
}

impl WindowSpec {
    pub const MIN_WINDOW_MS: f64 = 500.0;
    pub const MAX_WINDOW_MS: f64 = 2000.0;

    /// Window in the 500-2000 ms range; the segment count is pinned to a 4 s trial.
    pub fn new(window_ms: f64, step_ms: f64) -> Result<Self> {
        if !(Self::MIN_WINDOW_MS..=Self::MAX_WINDOW_MS).contains(&window_ms) {
            return Err(Error::InvalidParameter(format!(
                "window {window_ms} ms outside [{}, {}] ms",
                Self::MIN_WINDOW_MS,
                Self::MAX_WINDOW_MS
            )));
        }
        Self::unconstrained(window_ms, step_ms)
    }

    /// Any positive window up to the nominal trial length.
    pub fn unconstrained(window_ms: f64, step_ms: f64) -> Result<Self> {
        if !(window_ms > 0.0 && step_ms > 0.0 && window_ms.is_finite() && step_ms.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "window {window_ms} ms / step {step_ms} ms must be positive"
            )));
        }
        let mut spec = Self {
            window_ms,
            step_ms,
            expected_segments: 0,
        };
        spec.expected_segments = spec.segment_count(DEFAULT_TRIAL_MS)?;
        Ok(spec)
    }

    pub fn segment_count(&self, duration_ms: f64) -> Result<usize> {
        if self.window_ms > duration_ms + MS_EPS {
            return Err(Error::WindowTooLong {
                window_ms: self.window_ms,
                duration_ms,
            });
        }
        Ok(((duration_ms - self.window_ms) / self.step_ms + MS_EPS).floor() as usize + 1)
    }

    /// Sample-index ranges of every segment for an epoch of `n_samples` at `sample_rate_hz`.
    pub fn sample_ranges(&self, n_samples: usize, sample_rate_hz: f64) -> Result<Vec<Range<usize>>> {
        let duration_ms = n_samples as f64 / sample_rate_hz * 1000.0;
        let count = self.segment_count(duration_ms)?;
        let len = (self.window_ms * sample_rate_hz / 1000.0).round() as usize;
        if len == 0 {
            return Err(Error::EmptySegment);
        }
        let ranges = (0..count)
            .map(|i| {
                let start = (i as f64 * self.step_ms * sample_rate_hz / 1000.0).round() as usize;
                let start = start.min(n_samples.saturating_sub(len));
                start..start + len.min(n_samples)
            })
            .collect();
        Ok(ranges)
    }
}

/// Cuts `epoch` into sliding-window segments in temporal order.
pub fn segment(epoch: &SignalEpoch, window: &WindowSpec) -> Result<Vec<SignalEpoch>> {
    window
        .sample_ranges(epoch.n_samples(), epoch.sample_rate_hz())?
        .into_iter()
        .map(|r| epoch.slice(r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_epoch(n: usize, fs: f64) -> SignalEpoch {
        SignalEpoch::unnamed(vec![(0..n).map(|i| i as f64).collect()], fs).unwrap()
    }

    #[test]
    fn default_window_gives_thirty_segments() {
        let w = WindowSpec::default();
        assert_eq!(w.segment_count(4000.0).unwrap(), 30);
        assert_eq!(WindowSpec::new(1100.0, 100.0).unwrap(), w);
    }

    #[test]
    fn segment_examples() {
        let e = ramp_epoch(1000, 250.0);
        assert_eq!(segment(&e, &WindowSpec::default()).unwrap().len(), 30);
        let whole = WindowSpec::unconstrained(4000.0, 100.0).unwrap();
        assert_eq!(segment(&e, &whole).unwrap().len(), 1);
        let tiles = WindowSpec::new(500.0, 500.0).unwrap();
        let segs = segment(&e, &tiles).unwrap();
        assert_eq!(segs.len(), 8);
        for (i, s) in segs.iter().enumerate() {
            assert_eq!(s.channel(0)[0], (i * 125) as f64);
            assert!((s.t0_ms() - 500.0 * i as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn window_longer_than_epoch_is_rejected() {
        let e = ramp_epoch(200, 250.0);
        assert!(matches!(segment(&e, &WindowSpec::default()), Err(Error::WindowTooLong { .. })));
        assert_eq!(segment(&ramp_epoch(500, 250.0), &WindowSpec::default()).unwrap().len(), 10);
    }

    #[test]
    fn window_range_is_enforced() {
        assert!(WindowSpec::new(400.0, 100.0).is_err());
        assert!(WindowSpec::new(2100.0, 100.0).is_err());
        assert!(WindowSpec::new(1100.0, 0.0).is_err());
    }

    #[test]
    fn epoch_rejects_bad_input() {
        assert!(SignalEpoch::unnamed(vec![vec![f64::NAN]], 100.0).is_err());
        assert!(SignalEpoch::unnamed(vec![vec![1.0]], 0.0).is_err());
        assert!(SignalEpoch::unnamed(vec![], 100.0).is_err());
        assert!(SignalEpoch::new(vec![1.0, 2.0], 1, 10.0, vec!["a".into(), "b".into()]).is_err());
    }

    #[test]
    fn class_and_paradigm_parse() {
        for c in GraspClass::ALL {
            assert_eq!(c.as_str().parse::<GraspClass>().unwrap(), c);
            assert_eq!(GraspClass::from_index(c.index()), Some(c));
        }
        assert!("fist".parse::<GraspClass>().is_err());
        assert_eq!("imagery".parse::<Paradigm>().unwrap(), Paradigm::MotorImagery);
    }
}
