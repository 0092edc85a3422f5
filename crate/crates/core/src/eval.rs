//! Cross-validation harness, leakage audit and accuracy reports.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{predict_baseline, train_baseline, BaselineConfig, BaselineKind};
use crate::error::{Error, Result};
use crate::io::model::SavedModel;
use crate::matching::classify_trial;
use crate::pipeline::{train_pipeline, PipelineConfig};
use crate::signal::{GraspClass, Paradigm, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    Proposed,
    ModelI,
    ModelII,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Proposed, Method::ModelI, Method::ModelII];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::ModelI => "model1",
            Method::ModelII => "model2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "model1" => Ok(Method::ModelI),
            "model2" => Ok(Method::ModelII),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub pipeline: PipelineConfig,
    pub baseline: BaselineConfig,
    pub k_folds: usize,
    /// Seeds the within-class shuffle before fold assignment.
    pub fold_seed: u64,
    /// Which trials are scored; imagery trials are always scored by
    /// models trained on movement trials.
    pub paradigm: Paradigm,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            baseline: BaselineConfig::default(),
            k_folds: 5,
            fold_seed: 0,
            paradigm: Paradigm::ActualMovement,
        }
    }
}

/// Fits `method` on `trials` (all must be labelled movement trials for the proposed method).
pub fn fit_method(method: Method, trials: &[Trial], config: &EvalConfig) -> Result<SavedModel> {
    Ok(match method {
        Method::Proposed => SavedModel::Pipeline(train_pipeline(trials, &config.pipeline)?),
        Method::ModelI => SavedModel::Baseline(train_baseline(BaselineKind::ModelI, trials, &config.baseline)?),
        Method::ModelII => SavedModel::Baseline(train_baseline(BaselineKind::ModelII, trials, &config.baseline)?),
    })
}

/// Predicted class of a trial from its EEG.
pub fn predict(model: &SavedModel, trial: &Trial) -> Result<GraspClass> {
    match model {
        SavedModel::Pipeline(m) => Ok(classify_trial(m, trial)?.predicted),
        SavedModel::Baseline(m) => predict_baseline(m, trial),
    }
}

/// Every trial id that influenced a model: its fit set and, for the
/// proposed method, the library pattern sources.
pub fn model_trial_ids(model: &SavedModel) -> BTreeSet<String> {
    let mut ids: BTreeSet<String> = model.training_trial_ids().iter().cloned().collect();
    if let SavedModel::Pipeline(m) = model {
        ids.extend(m.library.trial_ids().map(str::to_string));
    }
    ids
}

/// Test trial ids that also appear among the model's training sources.
pub fn audit_leakage(model: &SavedModel, test_ids: &[&str]) -> Vec<String> {
    let used = model_trial_ids(model);
    test_ids.iter().filter(|id| used.contains(**id)).map(|id| id.to_string()).collect()
}

/// Fold index per item, stratified by class: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[GraspClass], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InsufficientData(format!("{k} folds requested, need at least 2")));
    }
    let mut folds = vec![0; labels.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in GraspClass::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|i| labels[*i] == class).collect();
        if idx.len() < k {
            return Err(Error::InsufficientData(format!(
                "class {class} has {} trials, fewer than {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            folds[i] = j % k;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub fold: usize,
    pub true_class: GraspClass,
    pub predicted: GraspClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Column name in emitted tables, usually the method.
    pub label: String,
    pub per_fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Sample standard deviation (divisor n - 1); 0 for a single fold.
    pub std_accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; 3]; 3],
    pub per_trial_records: Vec<TrialRecord>,
    /// Test trials found among the training sources of their fold's model.
    pub leakage_violations: Vec<String>,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EvaluationReport {
    /// Report from per-fold accuracies (fractions) and optional per-trial records.
    pub fn from_folds(label: impl Into<String>, per_fold_accuracy: Vec<f64>, per_trial_records: Vec<TrialRecord>) -> Self {
        let (mean_accuracy, std_accuracy) = mean_std(&per_fold_accuracy);
        let mut confusion = [[0usize; 3]; 3];
        for r in &per_trial_records {
            confusion[r.true_class.index()][r.predicted.index()] += 1;
        }
        Self {
            label: label.into(),
            per_fold_accuracy,
            mean_accuracy,
            std_accuracy,
            confusion,
            per_trial_records,
            leakage_violations: Vec::new(),
        }
    }

    /// Accuracy pooled over all scored trials.
    pub fn pooled_accuracy(&self) -> f64 {
        let n: usize = self.confusion.iter().flatten().sum();
        let hits: usize = (0..3).map(|i| self.confusion[i][i]).sum();
        hits as f64 / n as f64
    }
}

fn labels_of(trials: &[&Trial]) -> Result<Vec<GraspClass>> {
    trials
        .iter()
        .map(|t| t.class_label.ok_or_else(|| Error::UnlabeledTrial(t.id.clone())))
        .collect()
}

/// Stratified k-fold evaluation. For imagery, fold `f` trains on movement
/// trials outside movement fold `f` and scores the imagery trials in
/// imagery fold `f`.
pub fn cross_validate(trials: &[Trial], method: Method, config: &EvalConfig) -> Result<EvaluationReport> {
    let movement: Vec<&Trial> = trials.iter().filter(|t| t.paradigm == Paradigm::ActualMovement).collect();
    let move_labels = labels_of(&movement)?;
    let move_folds = stratified_folds(&move_labels, config.k_folds, config.fold_seed)?;
    let (test, test_labels, test_folds) = match config.paradigm {
        Paradigm::ActualMovement => (movement.clone(), move_labels.clone(), move_folds.clone()),
        Paradigm::MotorImagery => {
            let imagery: Vec<&Trial> = trials.iter().filter(|t| t.paradigm == Paradigm::MotorImagery).collect();
            let labels = labels_of(&imagery)?;
            let folds = stratified_folds(&labels, config.k_folds, config.fold_seed ^ 0x1A6E)?;
            (imagery, labels, folds)
        }
    };

    let mut per_fold = Vec::with_capacity(config.k_folds);
    let mut records = Vec::with_capacity(test.len());
    let mut violations = Vec::new();
    for fold in 0..config.k_folds {
        let train: Vec<Trial> = movement
            .iter()
            .zip(&move_folds)
            .filter(|(_, f)| **f != fold)
            .map(|(t, _)| (*t).clone())
            .collect();
        let model = fit_method(method, &train, config)?;
        let fold_test: Vec<(&Trial, GraspClass)> = test
            .iter()
            .zip(&test_labels)
            .zip(&test_folds)
            .filter(|(_, f)| **f == fold)
            .map(|((t, l), _)| (*t, *l))
            .collect();
        let ids: Vec<&str> = fold_test.iter().map(|(t, _)| t.id.as_str()).collect();
        violations.extend(audit_leakage(&model, &ids));
        let mut hits = 0usize;
        for (t, truth) in &fold_test {
            let predicted = predict(&model, t)?;
            hits += usize::from(predicted == *truth);
            records.push(TrialRecord {
                trial_id: t.id.clone(),
                fold,
                true_class: *truth,
                predicted,
            });
        }
        per_fold.push(hits as f64 / fold_test.len() as f64);
    }
    let mut report = EvaluationReport::from_folds(method.as_str(), per_fold, records);
    report.leakage_violations = violations;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown report format `{other}`"))),
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Accuracy table with one column per report, in percent with two
/// decimals, ending in a `Mean±Std.` row. Reports may have different fold
/// counts; missing cells are left blank.
pub fn emit_comparison(reports: &[EvaluationReport], format: ReportFormat) -> String {
    let n_rows = reports.iter().map(|r| r.per_fold_accuracy.len()).max().unwrap_or(0);
    let cell = |r: &EvaluationReport, i: usize| r.per_fold_accuracy.get(i).map(|v| pct(*v)).unwrap_or_default();
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            let header: Vec<&str> = reports.iter().map(|r| r.label.as_str()).collect();
            let _ = writeln!(out, "fold,{}", header.join(","));
            for i in 0..n_rows {
                let row: Vec<String> = reports.iter().map(|r| cell(r, i)).collect();
                let _ = writeln!(out, "{},{}", i + 1, row.join(","));
            }
            let means: Vec<String> = reports.iter().map(|r| pct(r.mean_accuracy)).collect();
            let stds: Vec<String> = reports.iter().map(|r| pct(r.std_accuracy)).collect();
            let _ = writeln!(out, "mean,{}", means.join(","));
            let _ = writeln!(out, "std,{}", stds.join(","));
        }
        ReportFormat::Table => {
            let summary: Vec<String> = reports
                .iter()
                .map(|r| format!("{}±{}", pct(r.mean_accuracy), pct(r.std_accuracy)))
                .collect();
            let width = reports
                .iter()
                .zip(&summary)
                .map(|(r, s)| r.label.chars().count().max(s.chars().count()))
                .max()
                .unwrap_or(0)
                .max(8);
            let _ = write!(out, "{:<10}", "Fold");
            for r in reports {
                let _ = write!(out, "  {:>width$}", r.label);
            }
            out.push('\n');
            let _ = write!(out, "{:<10}", "");
            for _ in reports {
                let _ = write!(out, "  {:>width$}", "Acc. (%)");
            }
            out.push('\n');
            for i in 0..n_rows {
                let _ = write!(out, "{:<10}", i + 1);
                for r in reports {
                    let _ = write!(out, "  {:>width$}", cell(r, i));
                }
                out.push('\n');
            }
            let _ = write!(out, "{:<10}", "Mean±Std.");
            for s in &summary {
                let _ = write!(out, "  {:>width$}", s);
            }
            out.push('\n');
            for r in reports.iter().filter(|r| !r.per_trial_records.is_empty()) {
                let _ = writeln!(out, "\nConfusion ({}; rows = true, columns = predicted)", r.label);
                let _ = write!(out, "{:<10}", "");
                for c in GraspClass::ALL {
                    let _ = write!(out, "{:>9}", c.as_str());
                }
                out.push('\n');
                for c in GraspClass::ALL {
                    let _ = write!(out, "{:<10}", c.as_str());
                    for n in r.confusion[c.index()] {
                        let _ = write!(out, "{n:>9}");
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}

pub fn emit_report(report: &EvaluationReport, format: ReportFormat) -> String {
    emit_comparison(std::slice::from_ref(report), format)
}

/// Per-fold, mean and std columns (in percent) recovered from [`ReportFormat::Csv`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedColumn {
    pub label: String,
    pub per_fold_percent: Vec<f64>,
    pub mean_percent: f64,
    pub std_percent: f64,
}

pub fn parse_report_csv(text: &str) -> Result<Vec<ParsedColumn>> {
    let bad = |m: String| Error::InvalidParameter(format!("report csv: {m}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty".into()))?;
    let mut cols: Vec<ParsedColumn> = header
        .split(',')
        .skip(1)
        .map(|l| ParsedColumn {
            label: l.to_string(),
            per_fold_percent: Vec::new(),
            mean_percent: f64::NAN,
            std_percent: f64::NAN,
        })
        .collect();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() + 1 {
            return Err(bad(format!("row `{line}` has {} fields", fields.len())));
        }
        for (col, f) in cols.iter_mut().zip(&fields[1..]) {
            if f.is_empty() {
                continue;
            }
            let v: f64 = f.parse().map_err(|_| bad(format!("bad number `{f}`")))?;
            match fields[0] {
                "mean" => col.mean_percent = v,
                "std" => col.std_percent = v,
                _ => col.per_fold_percent.push(v),
            }
        }
    }
    Ok(cols)
}
