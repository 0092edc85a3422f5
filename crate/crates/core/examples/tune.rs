//! Cross-validated accuracy of every method on a synthetic dataset.
//! Usage: tune [snr_db] [coupling_gain] [n_per_class]
use std::time::Instant;

use grasp_decode::*;

fn main() -> Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let mut cfg = SynthConfig::default();
    if let Some(v) = args.first() {
        cfg.snr_db = *v;
    }
    if let Some(v) = args.get(1) {
        cfg.coupling_gain = *v;
    }
    if let Some(v) = args.get(2) {
        cfg.n_trials_per_class = *v as usize;
    }
    let t = Instant::now();
    let trials = generate_dataset(&cfg)?;
    println!("generated {} trials in {:.1?}", trials.len(), t.elapsed());
    let ec = EvalConfig::default();
    for m in Method::ALL {
        let t = Instant::now();
        let r = cross_validate(&trials, m, &ec)?;
        let mi = cross_validate(&trials, m, &EvalConfig { paradigm: Paradigm::MotorImagery, ..ec.clone() })?;
        println!(
            "{m}: movement {:.3}±{:.3}  imagery {:.3}±{:.3}  ({:.1?})",
            r.mean_accuracy, r.std_accuracy, mi.mean_accuracy, mi.std_accuracy, t.elapsed()
        );
    }
    Ok(())
}
