//! Grasp decision by mean-squared error between an estimated pattern and
//! every pattern of the EMG library.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::emg::{ActivationPattern, PatternLibrary};
use crate::error::{Error, Result};
use crate::pipeline::{estimate_pattern, estimate_soft_pattern, EstimateMode, PipelineModel};
use crate::signal::{GraspClass, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MatchMode {
    /// Average the errors of each class's patterns.
    #[default]
    MeanMse,
    /// Smallest single error within each class.
    NearestNeighbor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternError {
    pub class: GraspClass,
    pub pattern_index: usize,
    pub trial_id: String,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub per_class_mean_mse: BTreeMap<GraspClass, f64>,
    pub per_pattern_mse: Vec<PatternError>,
    pub predicted: GraspClass,
}

pub fn pattern_mse(a: &ActivationPattern, b: &ActivationPattern) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{} patterns",
            a.n_channels(),
            a.n_segments(),
            b.n_channels(),
            b.n_segments()
        )));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let disagreements = a.values().iter().zip(b.values()).filter(|(x, y)| x != y).count();
    Ok(disagreements as f64 / a.len() as f64)
}

/// MSE between real-valued scores in [0, 1] and a binary pattern.
pub fn soft_pattern_mse(scores: &[Vec<f64>], b: &ActivationPattern) -> Result<f64> {
    if scores.len() != b.n_channels() || scores.iter().any(|r| r.len() != b.n_segments()) {
        return Err(Error::DimensionMismatch("soft pattern shape differs from library pattern".into()));
    }
    let total: f64 = scores
        .iter()
        .enumerate()
        .flat_map(|(c, row)| row.iter().enumerate().map(move |(s, v)| (c, s, *v)))
        .map(|(c, s, v)| (v - b.get(c, s) as f64).powi(2))
        .sum();
    Ok(total / b.len() as f64)
}

fn report_from<F>(library: &PatternLibrary, mode: MatchMode, mut error_of: F) -> Result<MatchReport>
where
    F: FnMut(&ActivationPattern) -> Result<f64>,
{
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let mut per_pattern_mse = Vec::with_capacity(library.len());
    let mut per_class_mean_mse = BTreeMap::new();
    for (class, patterns) in &library.patterns_by_class {
        if patterns.is_empty() {
            continue;
        }
        let mut sum = 0.0;
        let mut best = f64::INFINITY;
        for (i, p) in patterns.iter().enumerate() {
            let mse = error_of(p)?;
            sum += mse;
            best = best.min(mse);
            per_pattern_mse.push(PatternError {
                class: *class,
                pattern_index: i,
                trial_id: p.trial_id.clone(),
                mse,
            });
        }
        let agg = match mode {
            MatchMode::MeanMse => sum / patterns.len() as f64,
            MatchMode::NearestNeighbor => best,
        };
        per_class_mean_mse.insert(*class, agg);
    }
    // BTreeMap iterates in class order, so strict `<` keeps the lowest index on ties.
    let mut predicted = None;
    let mut lowest = f64::INFINITY;
    for (class, err) in &per_class_mean_mse {
        if *err < lowest {
            lowest = *err;
            predicted = Some(*class);
        }
    }
    Ok(MatchReport {
        per_class_mean_mse,
        per_pattern_mse,
        predicted: predicted.ok_or(Error::EmptyLibrary)?,
    })
}

pub fn classify_pattern_with(estimated: &ActivationPattern, library: &PatternLibrary, mode: MatchMode) -> Result<MatchReport> {
    report_from(library, mode, |p| pattern_mse(estimated, p))
}

/// Class with the lowest mean error over its library patterns; ties go to
/// the lowest class index.
pub fn classify_pattern(estimated: &ActivationPattern, library: &PatternLibrary) -> Result<MatchReport> {
    classify_pattern_with(estimated, library, MatchMode::MeanMse)
}

pub fn classify_soft(scores: &[Vec<f64>], library: &PatternLibrary, mode: MatchMode) -> Result<MatchReport> {
    report_from(library, mode, |p| soft_pattern_mse(scores, p))
}

/// Estimates the trial's pattern from EEG and matches it against the model's library.
pub fn classify_trial(model: &PipelineModel, trial: &Trial) -> Result<MatchReport> {
    match model.config.estimate_mode {
        EstimateMode::Hard => {
            let est = estimate_pattern(model, trial)?;
            classify_pattern_with(&est, &model.library, model.config.match_mode)
        }
        EstimateMode::Soft => {
            let scores = estimate_soft_pattern(model, trial)?;
            classify_soft(&scores, &model.library, model.config.match_mode)
        }
    }
}
