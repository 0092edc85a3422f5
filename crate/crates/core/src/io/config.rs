//! Synthetic-data configuration files in the key-value format. Keys not
//! present keep their defaults.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::kv::{parse_value, read_kv, KvEntry};
use crate::synth::{ClassCoding, SynthConfig};

pub fn synth_config_from_kv(entries: &[KvEntry], path: &Path) -> Result<SynthConfig> {
    let mut c = SynthConfig::default();
    for e in entries {
        match e.key.as_str() {
            "n_trials_per_class" => c.n_trials_per_class = parse_value(e, path)?,
            "eeg_channels" => c.eeg_channels = parse_value(e, path)?,
            "emg_channels" => c.emg_channels = parse_value(e, path)?,
            "sample_rate_hz" => c.sample_rate_hz = parse_value(e, path)?,
            "duration_ms" => c.duration_ms = parse_value(e, path)?,
            "snr_db" => c.snr_db = parse_value(e, path)?,
            "coupling_gain" => c.coupling_gain = parse_value(e, path)?,
            "imagery_coupling_factor" => c.imagery_coupling_factor = parse_value(e, path)?,
            "burst_ratio" => c.burst_ratio = parse_value(e, path)?,
            "jitter_ms" => c.jitter_ms = parse_value(e, path)?,
            "rng_seed" => c.rng_seed = parse_value(e, path)?,
            "coding" => {
                c.coding = match e.value.as_str() {
                    "temporal" => ClassCoding::Temporal,
                    "temporal+spectral" => ClassCoding::TemporalAndSpectral,
                    v => return Err(Error::format(path, Some(e.line), format!("unknown coding `{v}`"))),
                }
            }
            other => return Err(Error::format(path, Some(e.line), format!("unknown config key `{other}`"))),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn read_synth_config(path: &Path) -> Result<SynthConfig> {
    synth_config_from_kv(&read_kv(path)?, path)
}
