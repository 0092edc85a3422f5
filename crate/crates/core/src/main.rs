//! `grasp` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use grasp_decode::eval::{emit_comparison, model_trial_ids};
use grasp_decode::io::{read_manifest, read_synth_config};
use grasp_decode::matching::classify_trial;
use grasp_decode::{
    cross_validate, deserialize_model, fit_method, generate_dataset, predict, read_dataset, serialize_model,
    write_dataset, Error, EvalConfig, FilterBankSpec, GraspClass, Method, Paradigm, ReportFormat, SavedModel,
    SynthConfig, Trial, WindowSpec,
};

#[derive(Parser)]
#[command(name = "grasp", version, about = "Grasp-action decoding from EEG via estimated muscle-activation patterns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        /// Key-value config file; unspecified keys keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model on all labelled movement trials of a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: TrainOpts,
    },
    /// Classify every trial of a dataset with a saved model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// CSV of per-trial predictions.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified k-fold cross-validation.
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// proposed, model1, model2, or `all`; comma-separated lists are accepted.
        #[arg(long, default_value = "proposed")]
        method: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value = "movement")]
        paradigm: String,
        #[arg(long, default_value = "table")]
        report: String,
        /// Seed of the within-class fold shuffle.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: TrainOpts,
    },
    /// Print a dataset's manifest summary and per-class trial counts.
    Inspect {
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Args)]
struct TrainOpts {
    #[arg(long)]
    window_ms: Option<f64>,
    #[arg(long)]
    step_ms: Option<f64>,
    /// Preset name (paper-4-40-w4-s2, bands-11, broadband) or `low,high,width,step`.
    #[arg(long)]
    bands: Option<String>,
    #[arg(long)]
    csp_pairs: Option<usize>,
    /// CSP covariance shrinkage.
    #[arg(long)]
    gamma: Option<f64>,
    /// LDA covariance shrinkage.
    #[arg(long)]
    shrinkage: Option<f64>,
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_bands(s: &str) -> CliResult<FilterBankSpec> {
    if !s.contains(',') {
        return FilterBankSpec::preset(s).map_err(|e| usage(e.to_string()));
    }
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("--bands `{s}` is not low,high,width,step")))?;
    if v.len() != 4 {
        return Err(usage(format!("--bands `{s}` needs four numbers")));
    }
    FilterBankSpec::new(v[0], v[1], v[2], v[3]).map_err(|e| usage(e.to_string()))
}

fn eval_config(opts: &TrainOpts) -> CliResult<EvalConfig> {
    let mut c = EvalConfig::default();
    if opts.window_ms.is_some() || opts.step_ms.is_some() {
        let w = opts.window_ms.unwrap_or(c.pipeline.window.window_ms);
        let s = opts.step_ms.unwrap_or(c.pipeline.window.step_ms);
        c.pipeline.window = WindowSpec::new(w, s).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(b) = &opts.bands {
        let fb = parse_bands(b)?;
        c.pipeline.filter_bank = fb.clone();
        c.baseline.filter_bank = fb;
    }
    if let Some(m) = opts.csp_pairs {
        if m == 0 {
            return Err(usage("--csp-pairs must be positive"));
        }
        c.pipeline.m_pairs = m;
        c.baseline.m_pairs = m;
    }
    if let Some(g) = opts.gamma {
        if !(0.0..=1.0).contains(&g) {
            return Err(usage("--gamma must lie in [0, 1]"));
        }
        c.pipeline.gamma = g;
        c.baseline.gamma = g;
    }
    if let Some(s) = opts.shrinkage {
        if !(0.0..=1.0).contains(&s) {
            return Err(usage("--shrinkage must lie in [0, 1]"));
        }
        c.pipeline.shrinkage = s;
        c.baseline.shrinkage = s;
    }
    Ok(c)
}

fn parse_method(s: &str) -> CliResult<Method> {
    s.parse().map_err(|e: Error| usage(e.to_string()))
}

fn parse_methods(s: &str) -> CliResult<Vec<Method>> {
    if s == "all" {
        return Ok(Method::ALL.to_vec());
    }
    s.split(',').map(|m| parse_method(m.trim())).collect()
}

fn labelled_movement(trials: &[Trial]) -> Vec<Trial> {
    trials
        .iter()
        .filter(|t| t.paradigm == Paradigm::ActualMovement && t.class_label.is_some())
        .cloned()
        .collect()
}

fn run_synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let mut cfg = match config {
        Some(p) => read_synth_config(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    let trials = generate_dataset(&cfg)?;
    let manifest = write_dataset(&trials, out)?;
    println!(
        "wrote {} trials ({} per class and paradigm) to {}",
        manifest.trial_entries.len(),
        cfg.n_trials_per_class,
        out.display()
    );
    Ok(())
}

fn run_train(data: &Path, method: &str, out: &Path, opts: &TrainOpts) -> CliResult<()> {
    let method = parse_method(method)?;
    let config = eval_config(opts)?;
    let trials = labelled_movement(&read_dataset(data)?);
    if trials.is_empty() {
        return Err(Error::InsufficientData("dataset has no labelled movement trials".into()).into());
    }
    let model = fit_method(method, &trials, &config)?;
    serialize_model(&model, out)?;
    println!("trained {method} on {} trials; model written to {}", trials.len(), out.display());
    Ok(())
}

fn run_classify(model_path: &Path, data: &Path, out: &Path) -> CliResult<()> {
    let model = deserialize_model(model_path)?;
    let trials = read_dataset(data)?;
    let used = model_trial_ids(&model);
    let mut csv = String::from("trial_id,paradigm,true,predicted,mse_lateral,mse_pincer,mse_palmar\n");
    let mut tally: BTreeMap<Paradigm, (usize, usize)> = BTreeMap::new();
    let mut seen_in_training = 0usize;
    for t in &trials {
        let (predicted, mse) = match &model {
            SavedModel::Pipeline(m) => {
                let r = classify_trial(m, t)?;
                let mse: Vec<String> = GraspClass::ALL
                    .iter()
                    .map(|c| r.per_class_mean_mse.get(c).map(|v| format!("{v:.6}")).unwrap_or_default())
                    .collect();
                (r.predicted, mse)
            }
            SavedModel::Baseline(_) => (predict(&model, t)?, vec![String::new(); 3]),
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            t.id,
            t.paradigm.as_str(),
            t.class_label.map_or("unlabeled", GraspClass::as_str),
            predicted,
            mse.join(",")
        );
        if let Some(truth) = t.class_label {
            let e = tally.entry(t.paradigm).or_default();
            e.0 += usize::from(truth == predicted);
            e.1 += 1;
        }
        seen_in_training += usize::from(used.contains(&t.id));
    }
    std::fs::write(out, csv).map_err(Error::from)?;
    println!("classified {} trials; predictions written to {}", trials.len(), out.display());
    for (p, (hits, n)) in tally {
        println!("{} accuracy: {:.2}% ({hits}/{n})", p.as_str(), 100.0 * hits as f64 / n as f64);
    }
    if seen_in_training > 0 {
        eprintln!("note: {seen_in_training} classified trials were part of the model's training data");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    data: &Path,
    methods: &str,
    folds: usize,
    paradigm: &str,
    report: &str,
    seed: u64,
    out: Option<&Path>,
    opts: &TrainOpts,
) -> CliResult<bool> {
    let methods = parse_methods(methods)?;
    let paradigm: Paradigm = paradigm.parse().map_err(|e: Error| usage(e.to_string()))?;
    let format: ReportFormat = report.parse().map_err(|e: Error| usage(e.to_string()))?;
    if folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    let mut config = eval_config(opts)?;
    config.k_folds = folds;
    config.fold_seed = seed;
    config.paradigm = paradigm;
    let trials = read_dataset(data)?;
    let reports = methods
        .iter()
        .map(|m| cross_validate(&trials, *m, &config))
        .collect::<grasp_decode::Result<Vec<_>>>()?;
    let text = emit_comparison(&reports, format);
    print!("{text}");
    if let Some(p) = out {
        std::fs::write(p, &text).map_err(Error::from)?;
    }
    let leaks: usize = reports.iter().map(|r| r.leakage_violations.len()).sum();
    if leaks > 0 {
        eprintln!("leakage audit: {leaks} test trials found in training sources");
    }
    Ok(leaks == 0)
}

fn run_inspect(data: &Path) -> CliResult<()> {
    let m = read_manifest(data)?;
    println!("format version: {}", m.version);
    println!("sample rate: {} Hz", m.sample_rate_hz);
    println!("EEG channels ({}): {}", m.eeg_channel_names.len(), m.eeg_channel_names.join(", "));
    println!("EMG channels ({}): {}", m.emg_channel_names.len(), m.emg_channel_names.join(", "));
    if let Some(r) = m.reference_emg_channel {
        println!("reference EMG channel: {r} ({})", m.reference_mode);
    }
    println!("trials: {}", m.trial_entries.len());
    let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for e in &m.trial_entries {
        *counts
            .entry((e.paradigm.as_str(), e.class_label.map_or("unlabeled", GraspClass::as_str)))
            .or_default() += 1;
    }
    for ((p, c), n) in counts {
        println!("  {p:<9} {c:<10} {n}");
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else if matches!(e, Error::InvalidParameter(_) | Error::InvalidBand { .. }) {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Synth { config, out, seed } => run_synth(config.as_deref(), out, *seed).map(|_| true),
        Command::Train { data, method, out, opts } => run_train(data, method, out, opts).map(|_| true),
        Command::Classify { model, data, out } => run_classify(model, data, out).map(|_| true),
        Command::Eval {
            data,
            method,
            folds,
            paradigm,
            report,
            seed,
            out,
            opts,
        } => run_eval(data, method, *folds, paradigm, report, *seed, out.as_deref(), opts),
        Command::Inspect { data } => run_inspect(data).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
