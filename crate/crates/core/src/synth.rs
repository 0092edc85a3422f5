//! Synthetic EEG/EMG trials with scripted muscle-activation schedules.
//!
//! EMG is unit Gaussian noise plus, while a muscle is active, a random-sign
//! carrier of amplitude `burst_ratio`. The constant-envelope burst keeps
//! segment RMS values close to their expectation, so EMG decoding of
//! generated trials is reliably exact. Each muscle drives one 8-30 Hz rhythmic EEG source with
//! a Gaussian spatial footprint over the channel strip; the source amplitude
//! is multiplied by `1 + coupling_gain` during the muscle's active intervals.
//! Every channel also carries unit-variance pink background noise. Motor
//! imagery trials have no EMG and a weaker coupling.
//!
//! Samples are rounded to `f32` precision so that datasets written to disk
//! read back bit-exactly.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::emg::{ActivationPattern, DEFAULT_MUSCLE_CHANNELS};
use crate::error::{Error, Result};
use crate::filter::design_bandpass;
use crate::signal::{GraspClass, Paradigm, SignalEpoch, Trial, WindowSpec, ARM_MUSCLES, DEFAULT_TRIAL_MS, MOTOR_EEG_CHANNELS};

/// Active intervals `[start_ms, end_ms)` per muscle channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationSchedule {
    pub per_channel_intervals: Vec<Vec<(f64, f64)>>,
    pub class_label: GraspClass,
}

impl ActivationSchedule {
    pub fn validate(&self, duration_ms: f64) -> Result<()> {
        for (c, intervals) in self.per_channel_intervals.iter().enumerate() {
            let mut sorted = intervals.clone();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (i, &(s, e)) in sorted.iter().enumerate() {
                if !(s >= 0.0 && s < e && e <= duration_ms) {
                    return Err(Error::InvalidConfig(format!(
                        "channel {c}: interval [{s}, {e}) outside [0, {duration_ms})"
                    )));
                }
                if i > 0 && sorted[i - 1].1 > s {
                    return Err(Error::InvalidConfig(format!("channel {c}: overlapping intervals")));
                }
            }
        }
        Ok(())
    }

    /// Per-sample activity mask for one channel.
    pub fn active_mask(&self, channel: usize, n_samples: usize, sample_rate_hz: f64) -> Vec<bool> {
        let mut mask = vec![false; n_samples];
        for &(s, e) in &self.per_channel_intervals[channel] {
            let a = ((s * sample_rate_hz / 1000.0).round() as usize).min(n_samples);
            let b = ((e * sample_rate_hz / 1000.0).round() as usize).min(n_samples);
            mask[a..b].iter_mut().for_each(|m| *m = true);
        }
        mask
    }

    /// Noise-free EMG decode of this schedule: a segment is active when its
    /// expected RMS `sqrt(1 + burst_ratio² · f)`, with `f` the fraction of
    /// its samples inside active intervals, strictly exceeds the mean
    /// expected RMS over segments.
    pub fn expected_pattern(
        &self,
        window: &WindowSpec,
        sample_rate_hz: f64,
        duration_ms: f64,
        burst_ratio: f64,
    ) -> Result<ActivationPattern> {
        let n = (duration_ms * sample_rate_hz / 1000.0).round() as usize;
        let ranges = window.sample_ranges(n, sample_rate_hz)?;
        let rows = (0..self.per_channel_intervals.len())
            .map(|c| {
                let mask = self.active_mask(c, n, sample_rate_hz);
                let level: Vec<f64> = ranges
                    .iter()
                    .map(|r| {
                        let frac = mask[r.clone()].iter().filter(|m| **m).count() as f64 / r.len() as f64;
                        (1.0 + burst_ratio * burst_ratio * frac).sqrt()
                    })
                    .collect();
                let mean = level.iter().sum::<f64>() / level.len() as f64;
                level.iter().map(|l| u8::from(*l > mean)).collect()
            })
            .collect::<Vec<Vec<u8>>>();
        Ok(ActivationPattern::from_rows(&rows)?.with_trial(String::new(), Some(self.class_label)))
    }

    /// Shifts each interval by an independent offset in `[-jitter_ms, jitter_ms]`,
    /// kept inside the trial without changing its length.
    pub fn jittered<R: Rng>(&self, jitter_ms: f64, duration_ms: f64, rng: &mut R) -> Self {
        let per_channel_intervals = self
            .per_channel_intervals
            .iter()
            .map(|ivs| {
                ivs.iter()
                    .map(|&(s, e)| {
                        let mut d = if jitter_ms > 0.0 { rng.random_range(-jitter_ms..=jitter_ms) } else { 0.0 };
                        d = d.max(-s).min(duration_ms - e);
                        (s + d, e + d)
                    })
                    .collect()
            })
            .collect();
        Self {
            per_channel_intervals,
            class_label: self.class_label,
        }
    }
}

/// Muscle activity length shared by every muscle and class.
const ACTIVE_MS: f64 = 700.0;
const SLOT_MS: f64 = 600.0;
const FIRST_ONSET_MS: f64 = 100.0;

/// Three grasp schedules with one 700 ms burst per muscle, starting at
/// `100 + 600 * slot` ms. Classes differ
/// only in burst onset order, so every muscle carries the same total
/// activity in every class.
pub fn default_schedules() -> BTreeMap<GraspClass, ActivationSchedule> {
    const SLOTS: [[usize; 6]; 3] = [[0, 1, 2, 3, 4, 5], [5, 4, 3, 2, 1, 0], [1, 3, 5, 0, 4, 2]];
    GraspClass::ALL
        .iter()
        .map(|&class| {
            let per_channel_intervals = SLOTS[class.index()]
                .iter()
                .map(|&slot| {
                    let start = FIRST_ONSET_MS + slot as f64 * SLOT_MS;
                    vec![(start, start + ACTIVE_MS)]
                })
                .collect();
            (
                class,
                ActivationSchedule {
                    per_channel_intervals,
                    class_label: class,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ClassCoding {
    /// Classes differ only in the timing of muscle activity.
    #[default]
    Temporal,
    /// Additionally, each class carries a sustained rhythm in its own
    /// frequency band and scalp region.
    TemporalAndSpectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_trials_per_class: usize,
    pub eeg_channels: usize,
    pub emg_channels: usize,
    pub sample_rate_hz: f64,
    pub duration_ms: f64,
    /// Rest-state rhythmic source power over background power, in dB.
    pub snr_db: f64,
    /// Relative source amplitude increase while the coupled muscle is active.
    pub coupling_gain: f64,
    /// Coupling multiplier for motor imagery trials.
    pub imagery_coupling_factor: f64,
    /// Burst carrier amplitude over baseline RMS.
    pub burst_ratio: f64,
    pub jitter_ms: f64,
    pub coding: ClassCoding,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_trials_per_class: 50,
            eeg_channels: 20,
            emg_channels: DEFAULT_MUSCLE_CHANNELS,
            sample_rate_hz: 250.0,
            duration_ms: DEFAULT_TRIAL_MS,
            snr_db: -13.0,
            coupling_gain: 1.0,
            imagery_coupling_factor: 0.5,
            burst_ratio: 10.0,
            jitter_ms: 100.0,
            coding: ClassCoding::Temporal,
            rng_seed: 2020,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_trials_per_class == 0 {
            return bad("n_trials_per_class must be positive".into());
        }
        if self.emg_channels != DEFAULT_MUSCLE_CHANNELS {
            return bad(format!("emg_channels must be {DEFAULT_MUSCLE_CHANNELS}"));
        }
        if self.eeg_channels < DEFAULT_MUSCLE_CHANNELS {
            return bad(format!("eeg_channels must be at least {DEFAULT_MUSCLE_CHANNELS}"));
        }
        if !(self.sample_rate_hz >= 100.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample rate {} below 100 Hz", self.sample_rate_hz));
        }
        if !(self.duration_ms > 0.0 && self.duration_ms.is_finite()) {
            return bad("duration must be positive".into());
        }
        if !(self.burst_ratio >= 1.0) || !(self.coupling_gain >= 0.0) || !(self.imagery_coupling_factor >= 0.0) {
            return bad("burst ratio must be >= 1 and coupling terms non-negative".into());
        }
        if !(self.jitter_ms >= 0.0) || !self.snr_db.is_finite() {
            return bad("jitter must be non-negative and snr finite".into());
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_ms * self.sample_rate_hz / 1000.0).round() as usize
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn stream_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED, |acc, p| splitmix(acc ^ splitmix(*p)))
}

fn paradigm_code(p: Paradigm) -> u64 {
    match p {
        Paradigm::ActualMovement => 1,
        Paradigm::MotorImagery => 2,
    }
}

fn white<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalize_rms(x: &mut [f64]) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
}

/// Unit-RMS 1/f-like noise (three-pole pinking filter).
fn pink<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    let mut out: Vec<f64> = white(rng, n)
        .into_iter()
        .map(|w| {
            b0 = 0.99765 * b0 + w * 0.099_046;
            b1 = 0.963 * b1 + w * 0.296_516_4;
            b2 = 0.57 * b2 + w * 1.052_691_3;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect();
    normalize_rms(&mut out);
    out
}

/// Unit-RMS band-limited noise.
fn rhythm<R: Rng>(rng: &mut R, n: usize, low_hz: f64, high_hz: f64, fs: f64) -> Result<Vec<f64>> {
    let f = design_bandpass(low_hz, high_hz, 4, fs)?;
    let mut x = f.filtfilt(&white(rng, n));
    normalize_rms(&mut x);
    Ok(x)
}

fn footprint(n_eeg: usize, centre: f64, width: f64) -> Vec<f64> {
    (0..n_eeg)
        .map(|c| (-((c as f64 - centre).powi(2)) / (2.0 * width * width)).exp())
        .collect()
}

fn to_f32_grid(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = *v as f32 as f64);
}

fn eeg_names(n: usize) -> Vec<String> {
    if n == MOTOR_EEG_CHANNELS.len() {
        MOTOR_EEG_CHANNELS.iter().map(|s| s.to_string()).collect()
    } else {
        (0..n).map(|c| format!("eeg{c}")).collect()
    }
}

pub fn trial_id(paradigm: Paradigm, class: GraspClass, trial_seed: u64) -> String {
    format!("{}-{}-{:03}", paradigm.as_str(), class, trial_seed)
}

/// One trial following `schedule`. Deterministic in `(config, paradigm, trial_seed, schedule)`.
pub fn generate_trial(schedule: &ActivationSchedule, config: &SynthConfig, paradigm: Paradigm, trial_seed: u64) -> Result<Trial> {
    config.validate()?;
    schedule.validate(config.duration_ms)?;
    if schedule.per_channel_intervals.len() != config.emg_channels {
        return Err(Error::InvalidConfig(format!(
            "schedule has {} channels, config {}",
            schedule.per_channel_intervals.len(),
            config.emg_channels
        )));
    }
    let class = schedule.class_label;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(&[
        config.rng_seed,
        paradigm_code(paradigm),
        class.index() as u64,
        trial_seed,
    ]));
    let n = config.n_samples();
    let fs = config.sample_rate_hz;
    let n_eeg = config.eeg_channels;
    let n_muscles = config.emg_channels;
    let masks: Vec<Vec<bool>> = (0..n_muscles).map(|m| schedule.active_mask(m, n, fs)).collect();

    let gain = match paradigm {
        Paradigm::ActualMovement => config.coupling_gain,
        Paradigm::MotorImagery => config.coupling_gain * config.imagery_coupling_factor,
    };
    let source_amp = 10f64.powf(config.snr_db / 20.0);
    let spread = n_eeg as f64 / (2.0 * n_muscles as f64);

    let mut eeg: Vec<Vec<f64>> = (0..n_eeg).map(|_| pink(&mut rng, n)).collect();
    for (m, mask) in masks.iter().enumerate() {
        let mut src = rhythm(&mut rng, n, 8.0, 30.0, fs)?;
        for (v, active) in src.iter_mut().zip(mask) {
            *v *= source_amp * if *active { 1.0 + gain } else { 1.0 };
        }
        let centre = (m as f64 + 0.5) * n_eeg as f64 / n_muscles as f64 - 0.5;
        for (ch, w) in eeg.iter_mut().zip(footprint(n_eeg, centre, spread)) {
            ch.iter_mut().zip(&src).for_each(|(x, s)| *x += w * s);
        }
    }
    if config.coding == ClassCoding::TemporalAndSpectral {
        let lo = 8.0 + 8.0 * class.index() as f64;
        let src = rhythm(&mut rng, n, lo, lo + 4.0, fs)?;
        let centre = (class.index() as f64 + 0.5) * n_eeg as f64 / 3.0 - 0.5;
        let amp = source_amp * (1.0 + config.coupling_gain);
        for (ch, w) in eeg.iter_mut().zip(footprint(n_eeg, centre, spread)) {
            ch.iter_mut().zip(&src).for_each(|(x, s)| *x += amp * w * s);
        }
    }
    eeg.iter_mut().for_each(|ch| to_f32_grid(ch));
    let eeg = SignalEpoch::from_channels(eeg, fs, eeg_names(n_eeg))?;

    let emg = match paradigm {
        Paradigm::MotorImagery => None,
        Paradigm::ActualMovement => {
            let channels = masks
                .iter()
                .map(|mask| {
                    let mut x = white(&mut rng, n);
                    for (v, active) in x.iter_mut().zip(mask) {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        if *active {
                            *v += sign * config.burst_ratio;
                        }
                    }
                    to_f32_grid(&mut x);
                    x
                })
                .collect();
            let names = ARM_MUSCLES.iter().map(|s| s.to_string()).collect();
            Some(SignalEpoch::from_channels(channels, fs, names)?)
        }
    };
    Trial::new(trial_id(paradigm, class, trial_seed), eeg, emg, paradigm, Some(class))
}

/// `n_trials_per_class` movement trials per class followed by as many
/// imagery trials per class, each on an independently jittered schedule.
pub fn generate_dataset(config: &SynthConfig) -> Result<Vec<Trial>> {
    config.validate()?;
    let schedules = default_schedules();
    let mut trials = Vec::with_capacity(6 * config.n_trials_per_class);
    for paradigm in [Paradigm::ActualMovement, Paradigm::MotorImagery] {
        for class in GraspClass::ALL {
            for i in 0..config.n_trials_per_class as u64 {
                let mut jitter_rng = ChaCha8Rng::seed_from_u64(stream_seed(&[
                    config.rng_seed,
                    paradigm_code(paradigm),
                    class.index() as u64,
                    i,
                    0x717E,
                ]));
                let schedule = schedules[&class].jittered(config.jitter_ms, config.duration_ms, &mut jitter_rng);
                trials.push(generate_trial(&schedule, config, paradigm, i)?);
            }
        }
    }
    Ok(trials)
}
