//! Filter design, zero-phase filtering, notch and segmentation.

use grasp_decode::filter::{design_bandpass, design_highpass, design_notch, FilterBankSpec};
use grasp_decode::{segment, SignalEpoch, WindowSpec};
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-12)
}

/// Reference values from scipy.signal.butter(4, [8, 12], 'bandpass', fs=250, output='sos').
#[test]
fn bandpass_magnitude_matches_reference_design() {
    let f = design_bandpass(8.0, 12.0, 4, 250.0).unwrap();
    let reference = [
        (2.0, 5.828601267418e-05),
        (6.0, 2.586493362281e-02),
        (8.0, 7.071067811865e-01),
        (10.0, 9.999999957787e-01),
        (12.0, 7.071067811866e-01),
        (16.0, 2.487033500213e-02),
        (30.0, 4.180673045101e-04),
    ];
    for (hz, mag) in reference {
        assert!(close(f.magnitude(hz, 250.0), mag, 1e-6), "{hz} Hz: {} vs {mag}", f.magnitude(hz, 250.0));
    }
    assert_eq!(f.order(), 8);
    assert!(f.is_stable());
}

/// Reference from scipy.signal.sosfiltfilt(sos, x, padtype='odd', padlen=24).
#[test]
fn filtfilt_matches_reference() {
    let f = design_bandpass(8.0, 12.0, 4, 250.0).unwrap();
    let x: Vec<f64> = (0..500)
        .map(|n| {
            let t = n as f64 / 250.0;
            (2.0 * std::f64::consts::PI * 10.0 * t).sin() + 0.5 * (2.0 * std::f64::consts::PI * 3.0 * t + 0.3).cos() + 0.01 * n as f64
        })
        .collect();
    let y = f.filtfilt(&x);
    let reference = [
        (0, 3.980643532958e-02),
        (1, 2.563297978175e-01),
        (50, -1.427004466363e-02),
        (250, 6.419530833187e-03),
        (499, -3.428500406660e-03),
    ];
    for (i, v) in reference {
        assert!((y[i] - v).abs() < 1e-6, "sample {i}: {} vs {v}", y[i]);
    }
}

#[test]
fn highpass_matches_reference() {
    let f = design_highpass(20.0, 4, 1000.0).unwrap();
    for (hz, mag) in [(5.0, 3.886972755496e-03), (20.0, 7.071067811865e-01), (100.0, 9.999990119560e-01)] {
        assert!(close(f.magnitude(hz, 1000.0), mag, 1e-6));
    }
}

#[test]
fn notch_removes_line_noise_and_keeps_neighbours() {
    let fs = 1000.0;
    let f = design_notch(50.0, 30.0, fs).unwrap();
    assert!(f.magnitude(50.0, fs) < 1e-9);
    assert!(f.magnitude(30.0, fs) > 0.95 && f.magnitude(70.0, fs) > 0.95);
    let x: Vec<f64> = (0..4000).map(|n| (2.0 * std::f64::consts::PI * 50.0 * n as f64 / fs).sin()).collect();
    let y = f.filtfilt(&x);
    let tail_rms = (y[1000..3000].iter().map(|v| v * v).sum::<f64>() / 2000.0).sqrt();
    assert!(tail_rms < 1e-3, "residual {tail_rms}");
}

#[test]
fn filter_bank_presets() {
    let default = FilterBankSpec::default();
    assert_eq!(default.n_bands(), 17);
    assert_eq!(default.bands()[0], (4.0, 8.0));
    assert_eq!(*default.bands().last().unwrap(), (36.0, 40.0));
    assert_eq!(FilterBankSpec::preset("bands-11").unwrap().n_bands(), 11);
    assert_eq!(FilterBankSpec::preset("broadband").unwrap().bands(), vec![(4.0, 40.0)]);
    assert!(FilterBankSpec::preset("nope").is_err());
    // 40 Hz upper edge needs more than 80 Hz sampling
    assert!(default.design(80.0).is_err());
}

#[test]
fn spec_segment_examples() {
    let e = SignalEpoch::unnamed(vec![vec![0.0; 1000]; 2], 250.0).unwrap();
    assert_eq!(segment(&e, &WindowSpec::default()).unwrap().len(), 30);
    let long = WindowSpec::unconstrained(4000.0, 100.0).unwrap();
    assert_eq!(segment(&e, &long).unwrap().len(), 1);
    let fine = WindowSpec::new(500.0, 500.0).unwrap();
    assert_eq!(segment(&e, &fine).unwrap().len(), 8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filtfilt_is_linear(
        x in prop::collection::vec(-10.0f64..10.0, 200),
        y in prop::collection::vec(-10.0f64..10.0, 200),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let f = design_bandpass(8.0, 13.0, 4, 250.0).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = f.filtfilt(&mix);
        let fx = f.filtfilt(&x);
        let fy = f.filtfilt(&y);
        for i in 0..200 {
            prop_assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn designs_in_valid_range_are_stable(lo in 1.0f64..60.0, width in 1.0f64..40.0, order in 2usize..8) {
        let hi = (lo + width).min(124.0);
        let f = design_bandpass(lo, hi, order, 250.0).unwrap();
        prop_assert!(f.is_stable());
        let centre = 250.0 / std::f64::consts::PI
            * (((std::f64::consts::PI * lo / 250.0).tan() * (std::f64::consts::PI * hi / 250.0).tan()).sqrt()).atan();
        prop_assert!((f.magnitude(centre, 250.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn segments_cover_the_epoch_in_order(window in 500.0f64..2000.0, step in 50.0f64..500.0, n in 1000usize..1500) {
        let e = SignalEpoch::unnamed(vec![(0..n).map(|i| i as f64).collect()], 250.0).unwrap();
        let w = WindowSpec::new(window, step).unwrap();
        let segs = segment(&e, &w).unwrap();
        let len = (window * 250.0 / 1000.0).round() as usize;
        prop_assert_eq!(segs[0].channel(0)[0], 0.0);
        for pair in segs.windows(2) {
            prop_assert!(pair[1].channel(0)[0] > pair[0].channel(0)[0]);
        }
        for s in &segs {
            prop_assert_eq!(s.n_samples(), len);
            prop_assert!(*s.channel(0).last().unwrap() <= (n - 1) as f64);
        }
        // every sample up to the end of the last full window is covered
        let last = segs.last().unwrap();
        prop_assert!(n as f64 - (last.channel(0)[0] + len as f64) < step * 250.0 / 1000.0 + 1.0);
    }
}
