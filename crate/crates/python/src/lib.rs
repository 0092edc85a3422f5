//! Python bindings: synthetic data, dataset and model files, training,
//! classification, cross-validation and a few numerical building blocks.
//! Signals cross the boundary as nested lists (`channels x samples`).

use std::path::PathBuf;

use grasp_decode::emg::{binarize_channel as core_binarize, ActivationPattern, ThresholdPolicy};
use grasp_decode::eval::{cross_validate as core_cross_validate, fit_method, EvalConfig, EvaluationReport, Method};
use grasp_decode::filter::design_bandpass;
use grasp_decode::io::model::{model_from_str, model_to_string};
use grasp_decode::{
    classify_trial, deserialize_model, fit_csp as core_fit_csp, generate_dataset, pattern_mse as core_pattern_mse,
    predict, read_dataset as core_read_dataset, serialize_model, write_dataset as core_write_dataset, ClassCoding,
    Error, GraspClass, Paradigm, SavedModel, SignalEpoch, SynthConfig, Trial, WindowSpec,
};
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(grasp_decode, GraspDecodeError, PyException, "Invalid input, data or file.");
create_exception!(grasp_decode, NumericalError, GraspDecodeError, "Singular or degenerate numerics.");

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        GraspDecodeError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for grasp_decode::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn epoch_rows(e: &SignalEpoch) -> Vec<Vec<f64>> {
    e.channels().map(|c| c.to_vec()).collect()
}

/// One labelled or unlabelled multichannel recording.
#[pyclass(name = "Trial", module = "grasp_decode")]
#[derive(Clone)]
struct PyTrial {
    inner: Trial,
}

#[pymethods]
impl PyTrial {
    #[new]
    #[pyo3(signature = (id, eeg, sample_rate_hz, paradigm="movement", class_label=None, emg=None))]
    fn new(
        id: String,
        eeg: Vec<Vec<f64>>,
        sample_rate_hz: f64,
        paradigm: &str,
        class_label: Option<&str>,
        emg: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let eeg = SignalEpoch::unnamed(eeg, sample_rate_hz).py()?;
        let emg = emg.map(|e| SignalEpoch::unnamed(e, sample_rate_hz)).transpose().py()?;
        let paradigm: Paradigm = paradigm.parse().py()?;
        let class_label = class_label.map(str::parse::<GraspClass>).transpose().py()?;
        Ok(Self {
            inner: Trial::new(id, eeg, emg, paradigm, class_label).py()?,
        })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn paradigm(&self) -> &'static str {
        self.inner.paradigm.as_str()
    }

    #[getter]
    fn class_label(&self) -> Option<&'static str> {
        self.inner.class_label.map(GraspClass::as_str)
    }

    #[getter]
    fn sample_rate_hz(&self) -> f64 {
        self.inner.eeg.sample_rate_hz()
    }

    #[getter]
    fn eeg(&self) -> Vec<Vec<f64>> {
        epoch_rows(&self.inner.eeg)
    }

    #[getter]
    fn emg(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.emg.as_ref().map(epoch_rows)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Trial(id={:?}, paradigm={:?}, class_label={}, eeg={}x{}, emg={})",
            self.inner.id,
            self.paradigm(),
            self.class_label().map_or("None".to_string(), |c| format!("{c:?}")),
            self.inner.eeg.n_channels(),
            self.inner.eeg.n_samples(),
            self.inner.emg.as_ref().map_or("none".to_string(), |e| format!("{}x{}", e.n_channels(), e.n_samples())),
        )
    }
}

fn unwrap_trials(trials: &[PyTrial]) -> Vec<Trial> {
    trials.iter().map(|t| t.inner.clone()).collect()
}

fn wrap_trials(trials: Vec<Trial>) -> Vec<PyTrial> {
    trials.into_iter().map(|inner| PyTrial { inner }).collect()
}

/// Generates a labelled synthetic dataset (movement trials, then imagery).
#[pyfunction]
#[pyo3(signature = (n_trials_per_class=None, seed=None, snr_db=None, coupling_gain=None, jitter_ms=None, sample_rate_hz=None, eeg_channels=None, spectral_coding=false))]
#[allow(clippy::too_many_arguments)]
fn synth(
    n_trials_per_class: Option<usize>,
    seed: Option<u64>,
    snr_db: Option<f64>,
    coupling_gain: Option<f64>,
    jitter_ms: Option<f64>,
    sample_rate_hz: Option<f64>,
    eeg_channels: Option<usize>,
    spectral_coding: bool,
) -> PyResult<Vec<PyTrial>> {
    let d = SynthConfig::default();
    let config = SynthConfig {
        n_trials_per_class: n_trials_per_class.unwrap_or(d.n_trials_per_class),
        rng_seed: seed.unwrap_or(d.rng_seed),
        snr_db: snr_db.unwrap_or(d.snr_db),
        coupling_gain: coupling_gain.unwrap_or(d.coupling_gain),
        jitter_ms: jitter_ms.unwrap_or(d.jitter_ms),
        sample_rate_hz: sample_rate_hz.unwrap_or(d.sample_rate_hz),
        eeg_channels: eeg_channels.unwrap_or(d.eeg_channels),
        coding: if spectral_coding {
            ClassCoding::TemporalAndSpectral
        } else {
            ClassCoding::Temporal
        },
        ..d
    };
    Ok(wrap_trials(generate_dataset(&config).py()?))
}

#[pyfunction]
fn write_dataset(trials: Vec<PyTrial>, directory: PathBuf) -> PyResult<()> {
    core_write_dataset(&unwrap_trials(&trials), &directory).py()?;
    Ok(())
}

#[pyfunction]
fn read_dataset(directory: PathBuf) -> PyResult<Vec<PyTrial>> {
    Ok(wrap_trials(core_read_dataset(&directory).py()?))
}

fn eval_config(
    window_ms: Option<f64>,
    step_ms: Option<f64>,
    csp_pairs: Option<usize>,
    shrinkage: Option<f64>,
) -> PyResult<EvalConfig> {
    let mut config = EvalConfig::default();
    if window_ms.is_some() || step_ms.is_some() {
        let w = &config.pipeline.window;
        config.pipeline.window = WindowSpec::new(window_ms.unwrap_or(w.window_ms), step_ms.unwrap_or(w.step_ms)).py()?;
    }
    if let Some(m) = csp_pairs {
        config.pipeline.m_pairs = m;
        config.baseline.m_pairs = m;
    }
    if let Some(s) = shrinkage {
        config.pipeline.shrinkage = s;
        config.baseline.shrinkage = s;
    }
    Ok(config)
}

fn parse_method(method: &str) -> PyResult<Method> {
    method.parse().py()
}

/// A trained proposed pipeline or baseline.
#[pyclass(name = "Model", module = "grasp_decode")]
struct PyModel {
    inner: SavedModel,
}

#[pymethods]
impl PyModel {
    /// "proposed", "model1" or "model2".
    #[getter]
    fn method(&self) -> &'static str {
        match &self.inner {
            SavedModel::Pipeline(_) => Method::Proposed.as_str(),
            SavedModel::Baseline(b) => match b.kind {
                grasp_decode::BaselineKind::ModelI => Method::ModelI.as_str(),
                grasp_decode::BaselineKind::ModelII => Method::ModelII.as_str(),
            },
        }
    }

    #[getter]
    fn training_trial_ids(&self) -> Vec<String> {
        grasp_decode::eval::model_trial_ids(&self.inner).into_iter().collect()
    }

    fn predict(&self, trial: &PyTrial) -> PyResult<&'static str> {
        Ok(predict(&self.inner, &trial.inner).py()?.as_str())
    }

    /// Per-class mean MSE and per-pattern errors; proposed models only.
    fn classify<'py>(&self, py: Python<'py>, trial: &PyTrial) -> PyResult<Bound<'py, PyDict>> {
        let SavedModel::Pipeline(p) = &self.inner else {
            return Err(GraspDecodeError::new_err("classify needs a proposed-pipeline model"));
        };
        let r = classify_trial(p, &trial.inner).py()?;
        let out = PyDict::new(py);
        out.set_item("predicted", r.predicted.as_str())?;
        let means = PyDict::new(py);
        for (c, v) in &r.per_class_mean_mse {
            means.set_item(c.as_str(), v)?;
        }
        out.set_item("per_class_mean_mse", means)?;
        let per: Vec<(&str, usize, String, f64)> = r
            .per_pattern_mse
            .iter()
            .map(|e| (e.class.as_str(), e.pattern_index, e.trial_id.clone(), e.mse))
            .collect();
        out.set_item("per_pattern_mse", per)?;
        Ok(out)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        serialize_model(&self.inner, &path).py()
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: deserialize_model(&path).py()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        model_to_string(&self.inner).py()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: model_from_str(text, std::path::Path::new("<string>")).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Model(method={:?}, trained_on={})", self.method(), self.training_trial_ids().len())
    }
}

/// Fits a model on the labelled movement trials among `trials`.
#[pyfunction]
#[pyo3(signature = (trials, method="proposed", window_ms=None, step_ms=None, csp_pairs=None, shrinkage=None))]
fn train(
    trials: Vec<PyTrial>,
    method: &str,
    window_ms: Option<f64>,
    step_ms: Option<f64>,
    csp_pairs: Option<usize>,
    shrinkage: Option<f64>,
) -> PyResult<PyModel> {
    let method = parse_method(method)?;
    let config = eval_config(window_ms, step_ms, csp_pairs, shrinkage)?;
    let movement: Vec<Trial> = trials
        .iter()
        .filter(|t| t.inner.paradigm == Paradigm::ActualMovement)
        .map(|t| t.inner.clone())
        .collect();
    Ok(PyModel {
        inner: fit_method(method, &movement, &config).py()?,
    })
}

fn report_dict<'py>(py: Python<'py>, r: &EvaluationReport) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("method", &r.label)?;
    out.set_item("per_fold_accuracy", &r.per_fold_accuracy)?;
    out.set_item("mean_accuracy", r.mean_accuracy)?;
    out.set_item("std_accuracy", r.std_accuracy)?;
    out.set_item("pooled_accuracy", r.pooled_accuracy())?;
    out.set_item("confusion", r.confusion.iter().map(|row| row.to_vec()).collect::<Vec<_>>())?;
    let records: Vec<(String, usize, &str, &str)> = r
        .per_trial_records
        .iter()
        .map(|t| (t.trial_id.clone(), t.fold, t.true_class.as_str(), t.predicted.as_str()))
        .collect();
    out.set_item("records", records)?;
    out.set_item("leakage_violations", &r.leakage_violations)?;
    Ok(out)
}

/// Stratified k-fold evaluation; imagery is scored by movement-trained models.
#[pyfunction]
#[pyo3(signature = (trials, method="proposed", k_folds=5, fold_seed=0, paradigm="movement"))]
fn cross_validate<'py>(
    py: Python<'py>,
    trials: Vec<PyTrial>,
    method: &str,
    k_folds: usize,
    fold_seed: u64,
    paradigm: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let method = parse_method(method)?;
    let config = EvalConfig {
        k_folds,
        fold_seed,
        paradigm: paradigm.parse().py()?,
        ..EvalConfig::default()
    };
    let data = unwrap_trials(&trials);
    let report = py.allow_threads(|| core_cross_validate(&data, method, &config)).py()?;
    report_dict(py, &report)
}

/// Sliding-window RMS binarised against the mean segment RMS.
#[pyfunction]
#[pyo3(signature = (channel, sample_rate_hz, window_ms=1100.0, step_ms=100.0, threshold_scale=1.0))]
fn binarize_channel(channel: Vec<f64>, sample_rate_hz: f64, window_ms: f64, step_ms: f64, threshold_scale: f64) -> PyResult<Vec<u8>> {
    let window = WindowSpec::unconstrained(window_ms, step_ms).py()?;
    let policy = ThresholdPolicy::with_scale(threshold_scale).py()?;
    core_binarize(&channel, sample_rate_hz, &window, &policy).py()
}

fn pattern(rows: &[Vec<u8>]) -> PyResult<ActivationPattern> {
    ActivationPattern::from_rows(rows).py()
}

/// Fraction of disagreeing entries between two binary patterns.
#[pyfunction]
fn pattern_mse(a: Vec<Vec<u8>>, b: Vec<Vec<u8>>) -> PyResult<f64> {
    core_pattern_mse(&pattern(&a)?, &pattern(&b)?).py()
}

/// Zero-phase Butterworth band-pass of one channel.
#[pyfunction]
#[pyo3(signature = (x, low_hz, high_hz, sample_rate_hz, order=4))]
fn bandpass(x: Vec<f64>, low_hz: f64, high_hz: f64, sample_rate_hz: f64, order: usize) -> PyResult<Vec<f64>> {
    Ok(design_bandpass(low_hz, high_hz, order, sample_rate_hz).py()?.filtfilt(&x))
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(GraspDecodeError::new_err("expected a non-empty square matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Two-class CSP; returns the `2m x n` projection and every eigenvalue (descending).
#[pyfunction]
#[pyo3(signature = (cov_active, cov_rest, m_pairs=2, gamma=0.0))]
fn fit_csp<'py>(py: Python<'py>, cov_active: Vec<Vec<f64>>, cov_rest: Vec<Vec<f64>>, m_pairs: usize, gamma: f64) -> PyResult<Bound<'py, PyDict>> {
    let m = core_fit_csp(&matrix(&cov_active)?, &matrix(&cov_rest)?, m_pairs, gamma).py()?;
    let out = PyDict::new(py);
    let rows: Vec<Vec<f64>> = m.projection.row_iter().map(|r| r.iter().copied().collect()).collect();
    out.set_item("projection", rows)?;
    out.set_item("eigenvalues", m.eigenvalues)?;
    out.set_item("retained_eigenvalues", m.retained_eigenvalues)?;
    Ok(out)
}

#[pymodule(name = "grasp_decode")]
fn grasp_decode_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("GraspDecodeError", m.py().get_type::<GraspDecodeError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyTrial>()?;
    m.add_class::<PyModel>()?;
    for f in [
        wrap_pyfunction!(synth, m)?,
        wrap_pyfunction!(write_dataset, m)?,
        wrap_pyfunction!(read_dataset, m)?,
        wrap_pyfunction!(train, m)?,
        wrap_pyfunction!(cross_validate, m)?,
        wrap_pyfunction!(binarize_channel, m)?,
        wrap_pyfunction!(pattern_mse, m)?,
        wrap_pyfunction!(bandpass, m)?,
        wrap_pyfunction!(fit_csp, m)?,
    ] {
        m.add_function(f)?;
    }
    Ok(())
}
