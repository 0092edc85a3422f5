//! CSP and LDA against closed-form and brute-force references.

use grasp_decode::csp::{class_covariance, extract_features, fit_csp, shrink, SpatialFilterModel};
use grasp_decode::filter::FilterBankSpec;
use grasp_decode::lda::{fit_lda, fit_multiclass_lda};
use grasp_decode::{GraspClass, SignalEpoch};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    &b * b.transpose() + DMatrix::identity(n, n) * 0.1
}

fn random_epoch(n_ch: usize, n: usize, rng: &mut ChaCha8Rng, gains: &[f64]) -> SignalEpoch {
    let ch = (0..n_ch)
        .map(|c| (0..n).map(|_| gains[c] * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)).collect::<Vec<f64>>())
        .collect();
    SignalEpoch::unnamed(ch, 250.0).unwrap()
}

#[test]
fn identical_classes_give_half_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = random_spd(6, &mut rng);
    let m = fit_csp(&c, &c, 3, 0.0).unwrap();
    assert!(m.eigenvalues.iter().all(|l| (l - 0.5).abs() < 1e-10));
}

#[test]
fn diagonal_covariances_give_ratio_eigenvalues() {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 1.0, 1.0]));
    let r = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, 4.0]));
    let m = fit_csp(&a, &r, 1, 0.0).unwrap();
    assert!((m.eigenvalues[0] - 0.8).abs() < 1e-12);
    assert!((m.eigenvalues[3] - 0.2).abs() < 1e-12);
    // first filter picks channel 0, last picks channel 3, signs normalised positive
    assert!(m.projection[(0, 0)] > 0.0 && m.projection[(0, 1)].abs() < 1e-12);
    assert!(m.projection[(1, 3)] > 0.0);
}

#[test]
fn singular_composite_and_bad_pairs_are_rejected() {
    let z = DMatrix::<f64>::zeros(4, 4);
    assert!(fit_csp(&z, &z, 1, 0.0).is_err());
    let i = DMatrix::<f64>::identity(4, 4);
    assert!(fit_csp(&i, &i, 3, 0.0).is_err());
    let rank1 = DMatrix::from_fn(4, 4, |r, c| ((r + 1) * (c + 1)) as f64);
    assert!(fit_csp(&rank1, &rank1, 1, 0.0).is_err());
    assert!(fit_csp(&rank1, &rank1, 1, 0.2).is_ok());
}

#[test]
fn shrinkage_preserves_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = random_spd(5, &mut rng);
    for g in [0.0, 0.3, 1.0] {
        assert!((shrink(&c, g).trace() - c.trace()).abs() < 1e-9);
    }
    let full = shrink(&c, 1.0);
    assert!((full[(0, 1)]).abs() < 1e-15);
}

#[test]
fn features_are_invariant_to_signal_gain() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gains_a = [3.0, 1.0, 1.0, 1.0];
    let gains_r = [1.0, 1.0, 1.0, 3.0];
    let act: Vec<SignalEpoch> = (0..10).map(|_| random_epoch(4, 200, &mut rng, &gains_a)).collect();
    let rest: Vec<SignalEpoch> = (0..10).map(|_| random_epoch(4, 200, &mut rng, &gains_r)).collect();
    let fb = FilterBankSpec::preset("broadband").unwrap();
    let covs = vec![(class_covariance(&act).unwrap(), class_covariance(&rest).unwrap())];
    let model = SpatialFilterModel::fit(&covs, fb, 2, 0.0).unwrap();
    let x = random_epoch(4, 200, &mut rng, &gains_a);
    let f = extract_features(&model, std::slice::from_ref(&x)).unwrap();
    assert_eq!(f.len(), 4);
    let scaled = |k: f64| x.map_channels(|c| Ok(c.iter().map(|v| v * k).collect())).unwrap();
    // power-of-two gains are exact in floating point
    assert_eq!(extract_features(&model, &[scaled(4.0)]).unwrap().values, f.values);
    let g = extract_features(&model, &[scaled(3.7)]).unwrap();
    for (a, b) in g.values.iter().zip(&f.values) {
        assert!((a - b).abs() < 1e-12);
    }
    // active-class trial has more variance on the first filter than rest-class trial
    let y = random_epoch(4, 200, &mut rng, &gains_r);
    let fy = extract_features(&model, &[y]).unwrap();
    assert!(f.values[0] > fy.values[0]);
}

#[test]
fn silent_segment_is_degenerate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c = random_spd(3, &mut rng);
    let model = SpatialFilterModel::fit(&[(c.clone(), c)], FilterBankSpec::preset("broadband").unwrap(), 1, 0.0).unwrap();
    let silent = SignalEpoch::unnamed(vec![vec![1.0; 50]; 3], 250.0).unwrap();
    assert!(extract_features(&model, &[silent]).is_err());
}

#[test]
fn multiclass_lda_separates_three_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let centres = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, c) in centres.iter().enumerate() {
        for _ in 0..100 {
            let e0: f64 = StandardNormal.sample(&mut rng);
            let e1: f64 = StandardNormal.sample(&mut rng);
            xs.push(vec![c[0] + e0, c[1] + e1]);
            ys.push(GraspClass::ALL[k]);
        }
    }
    let m = fit_multiclass_lda(&xs, &ys, 0.0).unwrap();
    let hits = xs.iter().zip(&ys).filter(|(x, y)| m.predict(x).unwrap() == **y).count();
    assert!(hits as f64 / 300.0 > 0.9);
    assert_eq!(m.predict(&[0.0, 0.0]).unwrap(), GraspClass::Lateral);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn csp_diagonalises_both_classes(seed in any::<u64>(), n in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_spd(n, &mut rng);
        let r = random_spd(n, &mut rng);
        let m = fit_csp(&a, &r, n / 2, 0.0).unwrap();
        let w = &m.projection;
        let pa = w * &a * w.transpose();
        let pr = w * &r * w.transpose();
        for i in 0..w.nrows() {
            for j in 0..w.nrows() {
                if i != j {
                    prop_assert!(pa[(i, j)].abs() < 1e-6 && pr[(i, j)].abs() < 1e-6);
                }
            }
            prop_assert!((pa[(i, i)] + pr[(i, i)] - 1.0).abs() < 1e-6);
            prop_assert!((pa[(i, i)] - m.retained_eigenvalues[i]).abs() < 1e-6);
        }
        for pair in m.eigenvalues.windows(2) {
            prop_assert!(pair[0] >= pair[1]);
        }
    }

    #[test]
    fn lda_is_invariant_to_label_swap(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..3).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) + if i < 20 { 0.0 } else { 1.5 }).collect())
            .collect();
        let ys: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let flipped: Vec<bool> = ys.iter().map(|y| !y).collect();
        let m = fit_lda(&xs, &ys, 0.1).unwrap();
        let f = fit_lda(&xs, &flipped, 0.1).unwrap();
        for x in &xs {
            prop_assert!((m.score(x) + f.score(x)).abs() < 1e-9);
        }
    }
}
