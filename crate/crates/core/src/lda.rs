//! Two-class linear discriminant analysis with covariance shrinkage, and a
//! one-vs-rest three-class head built from it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::GraspClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Priors {
    #[default]
    Equal,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Means of class 0 and class 1.
    pub class_means: [Vec<f64>; 2],
    pub shrinkage: f64,
}

impl LdaModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// Class 1 iff the score is strictly positive.
    pub fn predict(&self, x: &[f64]) -> bool {
        self.score(x) > 0.0
    }

    /// Posterior of class 1 under the shared-covariance Gaussian model.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.score(x)).exp())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} features for a {}-feature model",
                x.len(),
                self.weights.len()
            )));
        }
        Ok(())
    }

    pub fn try_score(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.score(x))
    }
}

fn validate_rows<R: AsRef<[f64]>>(features: &[R]) -> Result<usize> {
    let d = features.first().map(|r| r.as_ref().len()).ok_or(Error::EmptyInput)?;
    if d == 0 {
        return Err(Error::DimensionMismatch("zero-length feature vectors".into()));
    }
    for r in features {
        let r = r.as_ref();
        if r.len() != d {
            return Err(Error::DimensionMismatch(format!("feature length {} != {d}", r.len())));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite feature value".into()));
        }
    }
    Ok(d)
}

/// Fits `w = Σ⁻¹ (μ₁ - μ₀)` with `Σ` the pooled within-class covariance
/// shrunk toward `trace(Σ)/d · I`; the bias puts the boundary at the
/// midpoint of the projected means, offset by the log prior ratio when
/// `priors` is empirical.
pub fn fit_lda_with<R: AsRef<[f64]>>(features: &[R], labels: &[bool], shrinkage: f64, priors: Priors) -> Result<LdaModel> {
    let d = validate_rows(features)?;
    if labels.len() != features.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            labels.len(),
            features.len()
        )));
    }
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::InvalidParameter(format!("shrinkage {shrinkage} outside [0, 1]")));
    }
    let n1 = labels.iter().filter(|l| **l).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClassInput);
    }
    if n0 < 2 || n1 < 2 {
        return Err(Error::InsufficientData(format!(
            "LDA needs two samples per class, got {n0} and {n1}"
        )));
    }

    let mut means = [DVector::<f64>::zeros(d), DVector::<f64>::zeros(d)];
    for (x, &l) in features.iter().zip(labels) {
        means[l as usize] += DVector::from_column_slice(x.as_ref());
    }
    means[0] /= n0 as f64;
    means[1] /= n1 as f64;

    let mut scatter = DMatrix::<f64>::zeros(d, d);
    for (x, &l) in features.iter().zip(labels) {
        let c = DVector::from_column_slice(x.as_ref()) - &means[l as usize];
        scatter.syger(1.0, &c, &c, 1.0);
    }
    // `syger` writes the lower triangle only.
    scatter.fill_upper_triangle_with_lower_triangle();
    let pooled = scatter / (labels.len() - 2) as f64;
    let target = pooled.trace() / d as f64;
    let cov = &pooled * (1.0 - shrinkage) + DMatrix::identity(d, d) * (shrinkage * target);

    let diff = &means[1] - &means[0];
    let chol = cov.cholesky().ok_or(Error::SingularCovariance)?;
    // Cholesky can succeed on an exactly singular matrix through rounding;
    // reject pivots that are negligible relative to the largest.
    let pivots = chol.l_dirty().diagonal();
    let (lo, hi) = pivots.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.abs()), hi.max(p.abs())));
    if !(lo * lo > 1e-12 * hi * hi) {
        return Err(Error::SingularCovariance);
    }
    let weights = chol.solve(&diff);
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::SingularCovariance);
    }
    let midpoint = (&means[0] + &means[1]) * 0.5;
    let mut bias = -weights.dot(&midpoint);
    if priors == Priors::Empirical {
        bias += (n1 as f64 / n0 as f64).ln();
    }
    Ok(LdaModel {
        weights: weights.iter().copied().collect(),
        bias,
        class_means: [means[0].iter().copied().collect(), means[1].iter().copied().collect()],
        shrinkage,
    })
}

pub fn fit_lda<R: AsRef<[f64]>>(features: &[R], labels: &[bool], shrinkage: f64) -> Result<LdaModel> {
    fit_lda_with(features, labels, shrinkage, Priors::Equal)
}

/// One-vs-rest LDA over the three grasp classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassLdaModel {
    pub per_class: Vec<LdaModel>,
}

impl MulticlassLdaModel {
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.per_class.iter().map(|m| m.try_score(x)).collect()
    }

    /// Highest one-vs-rest score; ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<GraspClass> {
        let scores = self.scores(x)?;
        let mut best = 0;
        for (i, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = i;
            }
        }
        Ok(GraspClass::ALL[best])
    }
}

pub fn fit_multiclass_lda<R: AsRef<[f64]>>(features: &[R], labels: &[GraspClass], shrinkage: f64) -> Result<MulticlassLdaModel> {
    if labels.len() != features.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            labels.len(),
            features.len()
        )));
    }
    for class in GraspClass::ALL {
        if !labels.contains(&class) {
            return Err(Error::SingleClassInput);
        }
    }
    let per_class = GraspClass::ALL
        .iter()
        .map(|&class| {
            let binary: Vec<bool> = labels.iter().map(|l| *l == class).collect();
            fit_lda(features, &binary, shrinkage)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassLdaModel { per_class })
}
