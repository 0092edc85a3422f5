//! Direct three-class trial classifiers used for comparison: broadband
//! CSP + LDA (Model I) and filter-bank regularised CSP + LDA (Model II).
//! Both see EEG only, one feature vector per whole trial.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::csp::{whole_scatter, Scatter, SpatialFilterModel};
use crate::error::{Error, Result};
use crate::filter::{DesignedFilterBank, FilterBankSpec};
use crate::lda::{fit_lda, fit_multiclass_lda, LdaModel, MulticlassLdaModel};
use crate::signal::{GraspClass, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    ModelI,
    ModelII,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::ModelI => "model1",
            BaselineKind::ModelII => "model2",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model1" | "model-i" | "ModelI" => Ok(BaselineKind::ModelI),
            "model2" | "model-ii" | "ModelII" => Ok(BaselineKind::ModelII),
            other => Err(Error::InvalidParameter(format!("unknown baseline `{other}`"))),
        }
    }
}

/// How the three classes are split into two-class CSP problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MulticlassScheme {
    #[default]
    OneVsRest,
    PairwiseVoting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub m_pairs: usize,
    /// Shrinkage for Model II's CSP; Model I always uses 0.
    pub gamma: f64,
    pub shrinkage: f64,
    /// Sub-band plan for Model II; Model I always uses the 4-40 Hz band.
    pub filter_bank: FilterBankSpec,
    pub scheme: MulticlassScheme,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            m_pairs: 2,
            gamma: 0.1,
            shrinkage: 0.05,
            filter_bank: FilterBankSpec::default(),
            scheme: MulticlassScheme::OneVsRest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaselineHead {
    OneVsRest(MulticlassLdaModel),
    Pairwise(Vec<(GraspClass, GraspClass, LdaModel)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    /// One spatial model per two-class problem (per class for one-vs-rest,
    /// per pair for pairwise voting).
    pub spatial: Vec<SpatialFilterModel>,
    pub head: BaselineHead,
    pub training_trial_ids: Vec<String>,
}

const PAIRS: [(GraspClass, GraspClass); 3] = [
    (GraspClass::Lateral, GraspClass::Pincer),
    (GraspClass::Lateral, GraspClass::Palmar),
    (GraspClass::Pincer, GraspClass::Palmar),
];

fn effective(kind: BaselineKind, config: &BaselineConfig) -> Result<(FilterBankSpec, f64)> {
    Ok(match kind {
        BaselineKind::ModelI => (
            FilterBankSpec::preset("broadband")?
                .with_order(config.filter_bank.filter_order)
                .with_notch(config.filter_bank.notch_hz),
            0.0,
        ),
        BaselineKind::ModelII => {
            if !(config.gamma > 0.0) {
                return Err(Error::InvalidParameter("Model II needs a positive CSP shrinkage".into()));
            }
            (config.filter_bank.clone(), config.gamma)
        }
    })
}

fn trial_scatters(trial: &Trial, bank: &DesignedFilterBank) -> Result<Vec<Scatter>> {
    Ok(bank.apply(&trial.eeg)?.iter().map(whole_scatter).collect())
}

fn mean_normalized<'a>(items: impl Iterator<Item = &'a Scatter>, n: usize) -> Result<DMatrix<f64>> {
    let mut acc = DMatrix::zeros(n, n);
    let mut count = 0usize;
    for s in items {
        acc += s.normalized()?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::SingleClassInput);
    }
    Ok(acc / count as f64)
}

fn fit_spatial(
    scatters: &[Vec<Scatter>],
    in_active: impl Fn(usize) -> Option<bool>,
    fb: &FilterBankSpec,
    m_pairs: usize,
    gamma: f64,
) -> Result<SpatialFilterModel> {
    let n_bands = fb.n_bands();
    let n = scatters[0][0].sums.len();
    let in_active = &in_active;
    let mut covs = Vec::with_capacity(n_bands);
    for b in 0..n_bands {
        let pick = |want: bool| {
            scatters
                .iter()
                .enumerate()
                .filter(move |(i, _)| in_active(*i) == Some(want))
                .map(move |(_, s)| &s[b])
        };
        let active = mean_normalized(pick(true), n)?;
        let rest = mean_normalized(pick(false), n)?;
        covs.push((active, rest));
    }
    SpatialFilterModel::fit(&covs, fb.clone(), m_pairs, gamma)
}

fn features(spatial: &SpatialFilterModel, scatters: &[Scatter]) -> Result<Vec<f64>> {
    let refs: Vec<&Scatter> = scatters.iter().collect();
    spatial.features_from_scatters(&refs)
}

pub fn train_baseline(kind: BaselineKind, trials: &[Trial], config: &BaselineConfig) -> Result<BaselineModel> {
    let labels = trials
        .iter()
        .map(|t| t.class_label.ok_or_else(|| Error::UnlabeledTrial(t.id.clone())))
        .collect::<Result<Vec<_>>>()?;
    for class in GraspClass::ALL {
        let n = labels.iter().filter(|l| **l == class).count();
        if n == 0 {
            return Err(Error::SingleClassInput);
        }
        if n < 2 {
            return Err(Error::InsufficientData(format!("class {class} has a single trial")));
        }
    }
    let fs = trials[0].eeg.sample_rate_hz();
    let n_eeg = trials[0].eeg.n_channels();
    if let Some(t) = trials.iter().find(|t| t.eeg.sample_rate_hz() != fs || t.eeg.n_channels() != n_eeg) {
        return Err(Error::DimensionMismatch(format!("trial {} differs in rate or channel count", t.id)));
    }
    let (fb, gamma) = effective(kind, config)?;
    let bank = fb.design(fs)?;
    let scatters = trials
        .iter()
        .map(|t| trial_scatters(t, &bank))
        .collect::<Result<Vec<_>>>()?;

    let (spatial, head) = match config.scheme {
        MulticlassScheme::OneVsRest => {
            let spatial = GraspClass::ALL
                .iter()
                .map(|&c| fit_spatial(&scatters, |i| Some(labels[i] == c), &fb, config.m_pairs, gamma))
                .collect::<Result<Vec<_>>>()?;
            let feats = scatters
                .iter()
                .map(|s| spatial.iter().map(|sp| features(sp, s)).collect::<Result<Vec<_>>>().map(|v| v.concat()))
                .collect::<Result<Vec<_>>>()?;
            let head = fit_multiclass_lda(&feats, &labels, config.shrinkage)?;
            (spatial, BaselineHead::OneVsRest(head))
        }
        MulticlassScheme::PairwiseVoting => {
            let mut spatial = Vec::new();
            let mut heads = Vec::new();
            for (a, b) in PAIRS {
                let side = |i: usize| match labels[i] {
                    l if l == a => Some(true),
                    l if l == b => Some(false),
                    _ => None,
                };
                let sp = fit_spatial(&scatters, side, &fb, config.m_pairs, gamma)?;
                let mut feats = Vec::new();
                let mut ys = Vec::new();
                for (i, s) in scatters.iter().enumerate() {
                    if let Some(y) = side(i) {
                        feats.push(features(&sp, s)?);
                        ys.push(y);
                    }
                }
                heads.push((a, b, fit_lda(&feats, &ys, config.shrinkage)?));
                spatial.push(sp);
            }
            (spatial, BaselineHead::Pairwise(heads))
        }
    };
    Ok(BaselineModel {
        kind,
        spatial,
        head,
        training_trial_ids: trials.iter().map(|t| t.id.clone()).collect(),
    })
}

/// Predicted grasp class from the trial's EEG; ties go to the lowest class index.
pub fn predict_baseline(model: &BaselineModel, trial: &Trial) -> Result<GraspClass> {
    let first = model
        .spatial
        .first()
        .ok_or_else(|| Error::InvalidParameter("baseline has no spatial filters".into()))?;
    let expected = first.per_band[0].n_channels();
    if trial.eeg.n_channels() != expected {
        return Err(Error::DimensionMismatch(format!(
            "trial {} has {} EEG channels, model expects {expected}",
            trial.id,
            trial.eeg.n_channels()
        )));
    }
    let bank = first.filter_bank.design(trial.eeg.sample_rate_hz())?;
    let scatters = trial_scatters(trial, &bank)?;
    match &model.head {
        BaselineHead::OneVsRest(head) => {
            let f = model
                .spatial
                .iter()
                .map(|sp| features(sp, &scatters))
                .collect::<Result<Vec<_>>>()?
                .concat();
            head.predict(&f)
        }
        BaselineHead::Pairwise(heads) => {
            let mut votes = [0usize; 3];
            let mut margin = [0.0f64; 3];
            for ((a, b, lda), sp) in heads.iter().zip(&model.spatial) {
                let s = lda.try_score(&features(sp, &scatters)?)?;
                let winner = if s > 0.0 { *a } else { *b };
                votes[winner.index()] += 1;
                margin[winner.index()] += s.abs();
            }
            let mut best = 0;
            for i in 1..3 {
                if votes[i] > votes[best] || (votes[i] == votes[best] && margin[i] > margin[best]) {
                    best = i;
                }
            }
            Ok(GraspClass::ALL[best])
        }
    }
}
