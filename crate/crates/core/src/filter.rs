//! Butterworth band-pass design, zero-phase application, notch filter and
//! the sub-band filter bank.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalEpoch;

/// One second-order section, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct form II state that a constant input `x0` settles into.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let y0 = self.dc_gain() * x0;
        let z2 = self.b[2] * x0 - self.a[1] * y0;
        let z1 = self.b[1] * x0 - self.a[0] * y0 + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut state: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + state[0];
            state[0] = b1 * input - a1 * y + state[1];
            state[1] = b2 * input - a2 * y;
            *v = y;
        }
    }

    fn poles(&self) -> [Complex64; 2] {
        // z^2 + a1 z + a2 = 0
        let disc = Complex64::new(self.a[0] * self.a[0] - 4.0 * self.a[1], 0.0).sqrt();
        [(-self.a[0] + disc) / 2.0, (-self.a[0] - disc) / 2.0]
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub sections: Vec<Biquad>,
}

impl FilterCoefficients {
    /// Number of poles of the cascade.
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    pub fn response(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / sample_rate_hz);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        self.response(freq_hz, sample_rate_hz).norm()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(Biquad::poles).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Single causal pass from rest.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y, [0.0; 2]);
        }
        y
    }

    /// Causal pass with every section started in the steady state of a
    /// constant input equal to `x[0]`.
    fn apply_settled(&self, x: &mut [f64]) {
        let mut level = x.first().copied().unwrap_or(0.0);
        for s in &self.sections {
            let zi = s.steady_state(level);
            level *= s.dc_gain();
            s.run(x, zi);
        }
    }

    /// Zero-phase forward-backward filtering.
    ///
    /// The signal is extended at both ends by odd reflection of
    /// `3 * order()` samples (capped at `len - 1`) and each pass starts from
    /// the steady state of its first sample.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * self.order()).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        self.apply_settled(&mut ext);
        ext.reverse();
        self.apply_settled(&mut ext);
        ext.reverse();
        ext.drain(..pad);
        ext.truncate(n);
        ext
    }
}

fn check_band(low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Result<()> {
    let ok = low_hz > 0.0 && low_hz < high_hz && high_hz < sample_rate_hz / 2.0 && high_hz.is_finite();
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidBand {
            low_hz,
            high_hz,
            sample_rate_hz,
        })
    }
}

/// Digital Butterworth band-pass with a prototype of `order` poles
/// (`2 * order` poles after the band transform), as second-order sections.
/// Unit gain at the geometric centre of the pre-warped band.
pub fn design_bandpass(band_low_hz: f64, band_high_hz: f64, order: usize, sample_rate_hz: f64) -> Result<FilterCoefficients> {
    check_band(band_low_hz, band_high_hz, sample_rate_hz)?;
    if order < 2 {
        return Err(Error::InvalidParameter(format!("filter order {order} must be at least 2")));
    }

    let fs2 = 2.0 * sample_rate_hz;
    let w_low = fs2 * (PI * band_low_hz / sample_rate_hz).tan();
    let w_high = fs2 * (PI * band_high_hz / sample_rate_hz).tan();
    let bw = w_high - w_low;
    let w0_sq = w_low * w_high;

    let mut z_poles = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let proto = Complex64::from_polar(1.0, theta);
        let half = proto * bw / 2.0;
        let root = (half * half - w0_sq).sqrt();
        for s in [half + root, half - root] {
            z_poles.push((fs2 + s) / (fs2 - s));
        }
    }

    let sections = pair_poles(z_poles)?
        .into_iter()
        .map(|(p1, p2)| Biquad {
            // zeros at z = 1 and z = -1
            b: [1.0, 0.0, -1.0],
            a: [-(p1 + p2).re, (p1 * p2).re],
        })
        .collect::<Vec<_>>();

    let mut coeffs = FilterCoefficients { sections };
    let centre_hz = sample_rate_hz / PI * (w0_sq.sqrt() / fs2).atan();
    let gain = coeffs.magnitude(centre_hz, sample_rate_hz);
    let per_section = gain.powf(-1.0 / coeffs.sections.len() as f64);
    for s in &mut coeffs.sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }

    let max_pole = coeffs.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
    if !(max_pole < 1.0) || coeffs.sections.iter().any(|s| s.b.iter().chain(&s.a).any(|v| !v.is_finite())) {
        return Err(Error::UnstableDesign {
            max_pole_magnitude: max_pole,
        });
    }
    Ok(coeffs)
}

/// Digital Butterworth high-pass of even `order`, as second-order sections.
pub fn design_highpass(cutoff_hz: f64, order: usize, sample_rate_hz: f64) -> Result<FilterCoefficients> {
    if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
        return Err(Error::InvalidBand {
            low_hz: cutoff_hz,
            high_hz: sample_rate_hz / 2.0,
            sample_rate_hz,
        });
    }
    if order < 2 || order % 2 != 0 {
        return Err(Error::InvalidParameter(format!("high-pass order {order} must be even and at least 2")));
    }
    let fs2 = 2.0 * sample_rate_hz;
    let wc = fs2 * (PI * cutoff_hz / sample_rate_hz).tan();
    let z_poles = (0..order)
        .map(|k| {
            let proto = Complex64::from_polar(1.0, PI * (2 * k + order + 1) as f64 / (2 * order) as f64);
            let s = wc / proto;
            (fs2 + s) / (fs2 - s)
        })
        .collect();
    let mut coeffs = FilterCoefficients {
        sections: pair_poles(z_poles)?
            .into_iter()
            .map(|(p1, p2)| Biquad {
                b: [1.0, -2.0, 1.0],
                a: [-(p1 + p2).re, (p1 * p2).re],
            })
            .collect(),
    };
    let gain = coeffs.magnitude(sample_rate_hz / 2.0, sample_rate_hz);
    let per_section = gain.powf(-1.0 / coeffs.sections.len() as f64);
    for s in &mut coeffs.sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }
    if !coeffs.is_stable() {
        return Err(Error::UnstableDesign {
            max_pole_magnitude: coeffs.poles().iter().map(|p| p.norm()).fold(0.0, f64::max),
        });
    }
    Ok(coeffs)
}

/// Groups poles into conjugate pairs; leftover real poles are paired with each other.
fn pair_poles(poles: Vec<Complex64>) -> Result<Vec<(Complex64, Complex64)>> {
    const IMAG_TOL: f64 = 1e-10;
    let mut pairs = Vec::new();
    let mut reals = Vec::new();
    for p in &poles {
        if p.im.abs() <= IMAG_TOL * p.norm().max(1.0) {
            reals.push(Complex64::new(p.re, 0.0));
        } else if p.im > 0.0 {
            pairs.push((*p, p.conj()));
        }
    }
    if reals.len() % 2 != 0 || 2 * pairs.len() + reals.len() != poles.len() {
        return Err(Error::UnstableDesign {
            max_pole_magnitude: f64::NAN,
        });
    }
    reals.sort_by(|a, b| a.re.total_cmp(&b.re));
    pairs.extend(reals.chunks_exact(2).map(|c| (c[0], c[1])));
    Ok(pairs)
}

/// Second-order IIR notch at `notch_hz` with quality factor `quality`.
pub fn design_notch(notch_hz: f64, quality: f64, sample_rate_hz: f64) -> Result<FilterCoefficients> {
    if !(notch_hz > 0.0 && notch_hz < sample_rate_hz / 2.0) {
        return Err(Error::InvalidBand {
            low_hz: notch_hz,
            high_hz: notch_hz,
            sample_rate_hz,
        });
    }
    if !(quality > 0.0 && quality.is_finite()) {
        return Err(Error::InvalidParameter(format!("notch quality {quality} must be positive")));
    }
    let w0 = 2.0 * PI * notch_hz / sample_rate_hz;
    let alpha = w0.sin() / (2.0 * quality);
    let a0 = 1.0 + alpha;
    let c = -2.0 * w0.cos();
    Ok(FilterCoefficients {
        sections: vec![Biquad {
            b: [1.0 / a0, c / a0, 1.0 / a0],
            a: [c / a0, (1.0 - alpha) / a0],
        }],
    })
}

pub const DEFAULT_NOTCH_QUALITY: f64 = 30.0;

/// Zero-phase notch applied to every channel.
pub fn notch_filter(epoch: &SignalEpoch, notch_hz: f64, quality: f64) -> Result<SignalEpoch> {
    let coeffs = design_notch(notch_hz, quality, epoch.sample_rate_hz())?;
    epoch.map_channels(|ch| Ok(coeffs.filtfilt(ch)))
}

/// Sub-band plan: bands `[low + k*step, low + k*step + width]` while the
/// upper edge stays at or below `high_hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBankSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub band_width_hz: f64,
    pub band_step_hz: f64,
    pub filter_order: usize,
    pub notch_hz: Option<f64>,
}

impl Default for FilterBankSpec {
    fn default() -> Self {
        Self::preset("paper-4-40-w4-s2").expect("built-in preset")
    }
}

impl FilterBankSpec {
    pub const PRESETS: [&'static str; 3] = ["paper-4-40-w4-s2", "bands-11", "broadband"];

    pub fn new(low_hz: f64, high_hz: f64, band_width_hz: f64, band_step_hz: f64) -> Result<Self> {
        let spec = Self {
            low_hz,
            high_hz,
            band_width_hz,
            band_step_hz,
            filter_order: 4,
            notch_hz: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `paper-4-40-w4-s2`: 17 bands of 4 Hz every 2 Hz.
    /// `bands-11`: 11 bands of 4 Hz every 3.2 Hz.
    /// `broadband`: the single 4-40 Hz band.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-4-40-w4-s2" | "default" => Self::new(4.0, 40.0, 4.0, 2.0),
            "bands-11" => Self::new(4.0, 40.0, 4.0, 3.2),
            "broadband" => Self::new(4.0, 40.0, 36.0, 1.0),
            other => Err(Error::InvalidParameter(format!(
                "unknown band preset `{other}` (expected one of {:?})",
                Self::PRESETS
            ))),
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.filter_order = order;
        self
    }

    pub fn with_notch(mut self, notch_hz: Option<f64>) -> Self {
        self.notch_hz = notch_hz;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz) {
            return Err(Error::InvalidBand {
                low_hz: self.low_hz,
                high_hz: self.high_hz,
                sample_rate_hz: f64::NAN,
            });
        }
        if !(self.band_width_hz > 0.0 && self.band_step_hz > 0.0) {
            return Err(Error::InvalidParameter("band width and step must be positive".into()));
        }
        if self.bands().is_empty() {
            return Err(Error::InvalidParameter(format!(
                "band width {} Hz does not fit in [{}, {}] Hz",
                self.band_width_hz, self.low_hz, self.high_hz
            )));
        }
        Ok(())
    }

    pub fn bands(&self) -> Vec<(f64, f64)> {
        const EDGE_EPS: f64 = 1e-9;
        let mut out = Vec::new();
        for k in 0.. {
            let lo = self.low_hz + k as f64 * self.band_step_hz;
            let hi = lo + self.band_width_hz;
            if hi > self.high_hz + EDGE_EPS {
                break;
            }
            out.push((lo, hi));
        }
        out
    }

    pub fn n_bands(&self) -> usize {
        self.bands().len()
    }

    /// Designs every band filter for `sample_rate_hz`.
    pub fn design(&self, sample_rate_hz: f64) -> Result<DesignedFilterBank> {
        self.validate()?;
        let bands = self
            .bands()
            .into_iter()
            .map(|(lo, hi)| design_bandpass(lo, hi, self.filter_order, sample_rate_hz))
            .collect::<Result<Vec<_>>>()?;
        let notch = self
            .notch_hz
            .map(|f| design_notch(f, DEFAULT_NOTCH_QUALITY, sample_rate_hz))
            .transpose()?;
        Ok(DesignedFilterBank {
            sample_rate_hz,
            notch,
            bands,
        })
    }
}

/// A filter bank with coefficients for a fixed sample rate.
#[derive(Debug, Clone)]
pub struct DesignedFilterBank {
    pub sample_rate_hz: f64,
    pub notch: Option<FilterCoefficients>,
    pub bands: Vec<FilterCoefficients>,
}

impl DesignedFilterBank {
    pub fn apply(&self, epoch: &SignalEpoch) -> Result<Vec<SignalEpoch>> {
        if epoch.sample_rate_hz() != self.sample_rate_hz {
            return Err(Error::DimensionMismatch(format!(
                "filter bank designed for {} Hz, epoch sampled at {} Hz",
                self.sample_rate_hz,
                epoch.sample_rate_hz()
            )));
        }
        let notched;
        let source = match &self.notch {
            Some(n) => {
                notched = epoch.map_channels(|ch| Ok(n.filtfilt(ch)))?;
                &notched
            }
            None => epoch,
        };
        self.bands
            .iter()
            .map(|b| source.map_channels(|ch| Ok(b.filtfilt(ch))))
            .collect()
    }
}

/// Splits `epoch` into one zero-phase filtered copy per sub-band.
pub fn apply_filter_bank(epoch: &SignalEpoch, spec: &FilterBankSpec) -> Result<Vec<SignalEpoch>> {
    spec.design(epoch.sample_rate_hz())?.apply(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn bandpass_magnitude_on_grid() {
        let f = design_bandpass(4.0, 8.0, 4, 2500.0).unwrap();
        assert_eq!(f.order(), 8);
        assert!(f.is_stable());
        assert!(f.magnitude(6.0, 2500.0) >= 0.9);
        assert!(f.magnitude(0.5, 2500.0) <= 0.1);
        assert!(f.magnitude(50.0, 2500.0) <= 0.1);
        // -3 dB at the edges
        for edge in [4.0, 8.0] {
            let m = f.magnitude(edge, 2500.0);
            assert!((m - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6, "edge {edge}: {m}");
        }
    }

    #[test]
    fn odd_orders_and_wide_bands_are_stable() {
        for order in 2..=7 {
            for &(lo, hi) in &[(4.0, 8.0), (4.0, 40.0), (1.0, 100.0)] {
                let f = design_bandpass(lo, hi, order, 250.0).unwrap();
                assert_eq!(f.order(), 2 * order);
                assert!(f.is_stable());
            }
        }
    }

    #[test]
    fn band_above_nyquist_is_rejected() {
        assert!(matches!(design_bandpass(4.0, 8.0, 4, 7.0), Err(Error::InvalidBand { .. })));
        assert!(matches!(design_bandpass(8.0, 4.0, 4, 250.0), Err(Error::InvalidBand { .. })));
        assert!(design_bandpass(4.0, 8.0, 1, 250.0).is_err());
    }

    #[test]
    fn filtfilt_keeps_passband_and_kills_stopband() {
        let fs = 250.0;
        let f = design_bandpass(4.0, 8.0, 4, fs).unwrap();
        let inside = sine(6.0, fs, 2000);
        let outside = sine(20.0, fs, 2000);
        let kept = rms(&f.filtfilt(&inside)) / rms(&inside);
        let leaked = rms(&f.filtfilt(&outside)) / rms(&outside);
        assert!(kept >= 0.81, "kept {kept}");
        assert!(leaked <= 0.01, "leaked {leaked}");
    }

    #[test]
    fn notch_examples() {
        let fs = 500.0;
        let x60 = sine(60.0, fs, 4000);
        let x10 = sine(10.0, fs, 4000);
        let mut epoch = SignalEpoch::unnamed(vec![x60.clone(), x10.clone()], fs).unwrap();
        let out = notch_filter(&epoch, 60.0, DEFAULT_NOTCH_QUALITY).unwrap();
        assert!(rms(out.channel(0)) <= 0.05 * rms(&x60));
        assert!(rms(out.channel(1)) >= 0.90 * rms(&x10));
        for off in [50.0, 70.0] {
            let x = sine(off, fs, 4000);
            let y = design_notch(60.0, DEFAULT_NOTCH_QUALITY, fs).unwrap().filtfilt(&x);
            assert!(rms(&y) >= 0.90 * rms(&x), "{off} Hz");
        }
        epoch = SignalEpoch::unnamed(vec![vec![0.0; 100]], fs).unwrap();
        assert!(notch_filter(&epoch, 60.0, 30.0).unwrap().data().iter().all(|v| *v == 0.0));
        assert!(notch_filter(&epoch, 300.0, 30.0).is_err());
    }

    #[test]
    fn highpass_removes_drift() {
        let fs = 1000.0;
        let f = design_highpass(10.0, 4, fs).unwrap();
        assert!(f.magnitude(1.0, fs) < 1e-3);
        assert!((f.magnitude(200.0, fs) - 1.0).abs() < 1e-3);
        assert!((f.magnitude(10.0, fs) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!(design_highpass(10.0, 3, fs).is_err());
    }

    #[test]
    fn band_plans() {
        let spec = FilterBankSpec::default();
        let bands = spec.bands();
        assert_eq!(bands.len(), 17);
        assert_eq!(bands[0], (4.0, 8.0));
        assert_eq!(bands[16], (36.0, 40.0));
        assert_eq!(FilterBankSpec::new(4.0, 40.0, 36.0, 1.0).unwrap().bands(), vec![(4.0, 40.0)]);
        let eleven = FilterBankSpec::preset("bands-11").unwrap().bands();
        assert_eq!(eleven.len(), 11);
        assert!((eleven[10].1 - 40.0).abs() < 1e-9);
        assert!(FilterBankSpec::preset("nope").is_err());
    }

    #[test]
    fn filter_bank_preserves_shape_and_zero() {
        let epoch = SignalEpoch::unnamed(vec![vec![0.0; 500], vec![0.0; 500]], 250.0).unwrap();
        let out = apply_filter_bank(&epoch, &FilterBankSpec::default()).unwrap();
        assert_eq!(out.len(), 17);
        for band in &out {
            assert_eq!(band.n_channels(), 2);
            assert_eq!(band.n_samples(), 500);
            assert_eq!(band.channel_names(), epoch.channel_names());
            assert!(band.data().iter().all(|v| *v == 0.0));
        }
        let low_fs = SignalEpoch::unnamed(vec![vec![0.0; 50]], 60.0).unwrap();
        assert!(apply_filter_bank(&low_fs, &FilterBankSpec::default()).is_err());
    }
}
