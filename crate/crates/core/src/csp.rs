//! Common spatial patterns over filter-bank EEG, with optional shrinkage
//! toward a scaled identity, and log-variance features.

use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterBankSpec;
use crate::signal::SignalEpoch;

/// Relative eigenvalue floor below which the composite covariance is singular.
const SINGULAR_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspModel {
    /// `2m x n_channels`; rows are spatial filters ordered by decreasing eigenvalue.
    pub projection: DMatrix<f64>,
    /// Generalized eigenvalues of the retained filters, row-aligned with `projection`.
    pub retained_eigenvalues: Vec<f64>,
    /// Every generalized eigenvalue, descending.
    pub eigenvalues: Vec<f64>,
    pub m_pairs: usize,
    pub band_index: usize,
}

impl CspModel {
    pub fn n_channels(&self) -> usize {
        self.projection.ncols()
    }

    pub fn n_filters(&self) -> usize {
        self.projection.nrows()
    }
}

/// Uncentered scatter `X Xᵀ` of a segment plus per-channel sums, enough to
/// recover both the trace-normalised and the centered covariance.
#[derive(Debug, Clone)]
pub(crate) struct Scatter {
    pub raw: DMatrix<f64>,
    pub sums: Vec<f64>,
    pub n_samples: usize,
}

impl Scatter {
    fn zeros(n: usize) -> Self {
        Self {
            raw: DMatrix::zeros(n, n),
            sums: vec![0.0; n],
            n_samples: 0,
        }
    }

    fn of_range(channels: &[&[f64]], range: Range<usize>) -> Self {
        let n = channels.len();
        let mut out = Self::zeros(n);
        for i in 0..n {
            let xi = &channels[i][range.clone()];
            out.sums[i] = xi.iter().sum();
            for j in i..n {
                let xj = &channels[j][range.clone()];
                let d: f64 = xi.iter().zip(xj).map(|(a, b)| a * b).sum();
                out.raw[(i, j)] = d;
                out.raw[(j, i)] = d;
            }
        }
        out.n_samples = range.len();
        out
    }

    fn add(&mut self, other: &Scatter) {
        self.raw += &other.raw;
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        self.n_samples += other.n_samples;
    }

    /// `X Xᵀ / trace(X Xᵀ)`.
    pub fn normalized(&self) -> Result<DMatrix<f64>> {
        let tr = self.raw.trace();
        if !(tr > 0.0) {
            return Err(Error::DegenerateSegment);
        }
        Ok(&self.raw / tr)
    }

    /// Sample covariance with the channel means removed (divisor `n - 1`).
    pub fn centered(&self) -> DMatrix<f64> {
        let n = self.n_samples as f64;
        let k = self.sums.len();
        let mut c = self.raw.clone();
        for i in 0..k {
            for j in 0..k {
                c[(i, j)] -= self.sums[i] * self.sums[j] / n;
            }
        }
        c / (n - 1.0).max(1.0)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Scatter of every segment of one band-filtered epoch. Overlapping windows
/// on a common sample grid are assembled from shared blocks.
pub(crate) fn segment_scatters(epoch: &SignalEpoch, ranges: &[Range<usize>]) -> Vec<Scatter> {
    const MAX_BLOCKS_PER_WINDOW: usize = 64;
    let channels: Vec<&[f64]> = epoch.channels().collect();
    let block = ranges
        .iter()
        .fold(0, |g, r| gcd(gcd(g, r.start), r.len()));
    let uniform = ranges.iter().all(|r| r.len() == ranges[0].len());
    if block == 0 || !uniform || ranges[0].len() / block > MAX_BLOCKS_PER_WINDOW {
        return ranges
            .iter()
            .map(|r| Scatter::of_range(&channels, r.clone()))
            .collect();
    }
    let end = ranges.iter().map(|r| r.end).max().unwrap_or(0);
    let blocks: Vec<Scatter> = (0..end / block)
        .map(|b| Scatter::of_range(&channels, b * block..(b + 1) * block))
        .collect();
    ranges
        .iter()
        .map(|r| {
            let mut acc = Scatter::zeros(channels.len());
            for b in &blocks[r.start / block..r.end / block] {
                acc.add(b);
            }
            acc
        })
        .collect()
}

pub(crate) fn whole_scatter(epoch: &SignalEpoch) -> Scatter {
    let channels: Vec<&[f64]> = epoch.channels().collect();
    Scatter::of_range(&channels, 0..epoch.n_samples())
}

/// Average of trace-normalised `X Xᵀ` over segments.
pub fn class_covariance(segments: &[SignalEpoch]) -> Result<DMatrix<f64>> {
    let first = segments.first().ok_or(Error::EmptyInput)?;
    let n = first.n_channels();
    let mut acc = DMatrix::zeros(n, n);
    for seg in segments {
        if seg.n_channels() != n {
            return Err(Error::DimensionMismatch(format!(
                "segment has {} channels, expected {n}",
                seg.n_channels()
            )));
        }
        acc += whole_scatter(seg).normalized()?;
    }
    Ok(acc / segments.len() as f64)
}

/// `(1 - gamma) C + gamma * trace(C)/n * I`.
pub fn shrink(cov: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let n = cov.nrows();
    let target = cov.trace() / n as f64;
    cov * (1.0 - gamma) + DMatrix::identity(n, n) * (gamma * target)
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Solves `C_active w = λ (C_active + C_rest) w` by whitening the composite
/// covariance, keeping the filters of the `m_pairs` largest and smallest λ.
pub fn fit_csp(cov_active: &DMatrix<f64>, cov_rest: &DMatrix<f64>, m_pairs: usize, gamma: f64) -> Result<CspModel> {
    let n = cov_active.nrows();
    if cov_active.shape() != (n, n) || cov_rest.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "covariances are {:?} and {:?}",
            cov_active.shape(),
            cov_rest.shape()
        )));
    }
    if m_pairs == 0 || 2 * m_pairs > n {
        return Err(Error::DimensionMismatch(format!("{m_pairs} filter pairs for {n} channels")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("shrinkage gamma {gamma} outside [0, 1]")));
    }

    let active = shrink(cov_active, gamma);
    let rest = shrink(cov_rest, gamma);
    let composite = &active + &rest;
    let (comp_vals, comp_vecs) = sorted_eigen(composite);
    let top = comp_vals[0];
    let floor = comp_vals[n - 1];
    if !(top > 0.0) || floor <= SINGULAR_RTOL * top {
        return Err(Error::SingularComposite);
    }

    // whitening P = Λ^{-1/2} Uᵀ
    let mut whitening = comp_vecs.transpose();
    for (i, mut row) in whitening.row_iter_mut().enumerate() {
        row /= comp_vals[i].sqrt();
    }
    let whitened_active = &whitening * &active * whitening.transpose();
    let sym = (&whitened_active + whitened_active.transpose()) * 0.5;
    let (eigenvalues, rot) = sorted_eigen(sym);
    let filters = rot.transpose() * &whitening;

    let keep: Vec<usize> = (0..m_pairs).chain(n - m_pairs..n).collect();
    let mut projection = DMatrix::zeros(keep.len(), n);
    for (r, &k) in keep.iter().enumerate() {
        let mut row = filters.row(k).clone_owned();
        let (imax, _) = row
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best });
        if row[imax] < 0.0 {
            row = -row;
        }
        projection.set_row(r, &row);
    }
    Ok(CspModel {
        projection,
        retained_eigenvalues: keep.iter().map(|&k| eigenvalues[k]).collect(),
        eigenvalues,
        m_pairs,
        band_index: 0,
    })
}

/// Per-band CSP filters for one two-class problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialFilterModel {
    pub per_band: Vec<CspModel>,
    pub filter_bank: FilterBankSpec,
    pub regularization_gamma: f64,
}

impl SpatialFilterModel {
    pub fn n_features(&self) -> usize {
        self.per_band.iter().map(CspModel::n_filters).sum()
    }

    /// Fits one CSP per band from per-band (active, rest) class covariances.
    pub fn fit(
        class_covs: &[(DMatrix<f64>, DMatrix<f64>)],
        filter_bank: FilterBankSpec,
        m_pairs: usize,
        gamma: f64,
    ) -> Result<Self> {
        if class_covs.len() != filter_bank.n_bands() {
            return Err(Error::DimensionMismatch(format!(
                "{} band covariances for {} bands",
                class_covs.len(),
                filter_bank.n_bands()
            )));
        }
        let per_band = class_covs
            .iter()
            .enumerate()
            .map(|(b, (a, r))| {
                let mut m = fit_csp(a, r, m_pairs, gamma)?;
                m.band_index = b;
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            per_band,
            filter_bank,
            regularization_gamma: gamma,
        })
    }

    fn check_bands(&self, n: usize) -> Result<()> {
        if n != self.per_band.len() {
            return Err(Error::DimensionMismatch(format!(
                "{n} band segments for a {}-band model",
                self.per_band.len()
            )));
        }
        Ok(())
    }

    /// Same features as [`extract_features`], computed from segment scatters.
    pub(crate) fn features_from_scatters(&self, scatters: &[&Scatter]) -> Result<Vec<f64>> {
        self.check_bands(scatters.len())?;
        let mut out = Vec::with_capacity(self.n_features());
        for (model, sc) in self.per_band.iter().zip(scatters) {
            if sc.sums.len() != model.n_channels() {
                return Err(Error::DimensionMismatch(format!(
                    "segment has {} channels, model expects {}",
                    sc.sums.len(),
                    model.n_channels()
                )));
            }
            let cov = sc.centered();
            let variances: Vec<f64> = model
                .projection
                .row_iter()
                .map(|w| (w * &cov * w.transpose())[(0, 0)].max(0.0))
                .collect();
            let denom = (sc.n_samples as f64 - 1.0).max(1.0);
            let power: f64 = model
                .projection
                .row_iter()
                .map(|w| (w * &sc.raw * w.transpose())[(0, 0)] / denom)
                .sum();
            push_log_normalized(&mut out, &variances, power)?;
        }
        Ok(out)
    }
}

/// Variance totals at or below this fraction of the uncentered projected
/// power are rounding residue of a constant segment.
const DEGENERATE_RTOL: f64 = 1e-13;

fn push_log_normalized(out: &mut Vec<f64>, variances: &[f64], uncentered_power: f64) -> Result<()> {
    let total: f64 = variances.iter().sum();
    if !(total > 0.0) || total <= DEGENERATE_RTOL * uncentered_power {
        return Err(Error::DegenerateSegment);
    }
    // A single silent projection would give ln(0); floor it far below any real ratio.
    out.extend(variances.iter().map(|v| (v / total).max(1e-300).ln()));
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub segment_index: Option<usize>,
    pub trial_id: Option<String>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            segment_index: None,
            trial_id: None,
        }
    }

    pub fn tagged(mut self, trial_id: impl Into<String>, segment_index: usize) -> Self {
        self.trial_id = Some(trial_id.into());
        self.segment_index = Some(segment_index);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Projects each band's segment through its CSP filters and returns the
/// log of each filter's share of the band's total projected variance.
pub fn extract_features(model: &SpatialFilterModel, eeg_segment_per_band: &[SignalEpoch]) -> Result<FeatureVector> {
    model.check_bands(eeg_segment_per_band.len())?;
    let mut out = Vec::with_capacity(model.n_features());
    for (csp, seg) in model.per_band.iter().zip(eeg_segment_per_band) {
        if seg.n_channels() != csp.n_channels() {
            return Err(Error::DimensionMismatch(format!(
                "segment has {} channels, model expects {}",
                seg.n_channels(),
                csp.n_channels()
            )));
        }
        let projected = &csp.projection * seg.to_matrix();
        let n = projected.ncols() as f64;
        let denom = (n - 1.0).max(1.0);
        let variances: Vec<f64> = projected
            .row_iter()
            .map(|row| {
                let mean = row.sum() / n;
                row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / denom
            })
            .collect();
        let power = projected.iter().map(|v| v * v).sum::<f64>() / denom;
        push_log_normalized(&mut out, &variances, power)?;
    }
    Ok(FeatureVector::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_like_segment_covariance() {
        let seg = SignalEpoch::unnamed(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 100.0).unwrap();
        let c = class_covariance(&[seg]).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
    }

    #[test]
    fn zero_power_segment_is_degenerate() {
        let seg = SignalEpoch::unnamed(vec![vec![0.0; 4]; 2], 100.0).unwrap();
        assert!(matches!(class_covariance(&[seg]), Err(Error::DegenerateSegment)));
        assert!(matches!(class_covariance(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn diagonal_pair_recovers_axes() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.8, 0.2]));
        let r = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.2, 0.8]));
        let m = fit_csp(&a, &r, 1, 0.0).unwrap();
        assert!((m.eigenvalues[0] - 0.8).abs() < 1e-12);
        assert!((m.eigenvalues[1] - 0.2).abs() < 1e-12);
        // composite is the identity, so the unit-norm filters are the axes
        assert!((m.projection[(0, 0)] - 1.0).abs() < 1e-12 && m.projection[(0, 1)].abs() < 1e-12);
        assert!((m.projection[(1, 1)] - 1.0).abs() < 1e-12 && m.projection[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn equal_classes_and_full_shrinkage_give_half() {
        let c = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2]);
        let other = DMatrix::from_row_slice(3, 3, &[0.2, 0.0, 0.0, 0.0, 0.3, 0.1, 0.0, 0.1, 0.5]);
        for (a, r, gamma) in [(&c, &c, 0.0), (&c, &other, 1.0)] {
            let m = fit_csp(a, r, 1, gamma).unwrap();
            assert!(m.eigenvalues.iter().all(|l| (l - 0.5).abs() < 1e-12), "{:?}", m.eigenvalues);
            let comp = shrink(a, gamma) + shrink(r, gamma);
            for w in m.projection.row_iter() {
                assert!(((w * &comp * w.transpose())[(0, 0)] - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn singular_and_mismatched_inputs() {
        let z = DMatrix::<f64>::zeros(2, 2);
        assert!(matches!(fit_csp(&z, &z, 1, 0.0), Err(Error::SingularComposite)));
        let a = DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(fit_csp(&a, &b, 1, 0.0), Err(Error::DimensionMismatch(_))));
        assert!(matches!(fit_csp(&a, &a, 2, 0.0), Err(Error::DimensionMismatch(_))));
    }

    fn axis_model() -> SpatialFilterModel {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.8, 0.2]));
        let r = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.2, 0.8]));
        let fb = FilterBankSpec::preset("broadband").unwrap();
        SpatialFilterModel::fit(&[(a, r)], fb, 1, 0.0).unwrap()
    }

    #[test]
    fn feature_examples() {
        let model = axis_model();
        let equal = SignalEpoch::unnamed(vec![vec![1.0, -1.0, 1.0, -1.0], vec![2.0, 0.0, 2.0, 0.0]], 100.0).unwrap();
        let f = extract_features(&model, &[equal]).unwrap();
        assert!(f.values.iter().all(|v| (v - 0.5f64.ln()).abs() < 1e-12));

        let s3 = 3f64.sqrt();
        let skew = SignalEpoch::unnamed(vec![vec![s3, -s3, s3, -s3], vec![1.0, -1.0, 1.0, -1.0]], 100.0).unwrap();
        let f = extract_features(&model, &[skew]).unwrap();
        assert!((f.values[0] - 0.75f64.ln()).abs() < 1e-12);
        assert!((f.values[1] - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn scatter_route_matches_projection_route() {
        let model = axis_model();
        let seg = SignalEpoch::unnamed(
            vec![vec![0.3, -1.2, 2.0, 0.7, -0.1], vec![1.1, 0.4, -0.6, 0.2, 0.9]],
            100.0,
        )
        .unwrap();
        let direct = extract_features(&model, std::slice::from_ref(&seg)).unwrap();
        let sc = whole_scatter(&seg);
        let via = model.features_from_scatters(&[&sc]).unwrap();
        for (a, b) in direct.values.iter().zip(&via) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn block_scatters_match_direct() {
        let x: Vec<Vec<f64>> = (0..3)
            .map(|c| (0..100).map(|i| ((i * (c + 3)) as f64 * 0.37).sin()).collect())
            .collect();
        let epoch = SignalEpoch::unnamed(x, 100.0).unwrap();
        let ranges: Vec<Range<usize>> = (0..8).map(|i| i * 10..i * 10 + 30).collect();
        let fast = segment_scatters(&epoch, &ranges);
        let channels: Vec<&[f64]> = epoch.channels().collect();
        for (r, f) in ranges.iter().zip(&fast) {
            let slow = Scatter::of_range(&channels, r.clone());
            assert!((&slow.raw - &f.raw).abs().max() < 1e-12);
            assert_eq!(slow.n_samples, f.n_samples);
        }
    }
}
