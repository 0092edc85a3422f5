//! On-disk datasets: a `manifest.txt` key-value file plus one binary signal
//! file per epoch.
//!
//! Signal file layout (little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 16   | magic `GRSPDAT1` padded with NUL bytes  |
//! | 16     | 4    | `u32` channel count                     |
//! | 20     | 4    | `u32` samples per channel               |
//! | 24     | 8    | `f64` sample rate (Hz)                  |
//! | 32     | 4·C·N| `f32` samples, channel-major            |
//! | end-4  | 4    | `u32` CRC-32 of bytes 16..end-4         |

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::kv::{format_kv, parse_value, read_kv};
use crate::signal::{GraspClass, Paradigm, SignalEpoch, Trial, ARM_MUSCLES};

pub const SIGNAL_MAGIC: [u8; 16] = *b"GRSPDAT1\0\0\0\0\0\0\0\0";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const MANIFEST_VERSION: u32 = 1;
const HEADER_LEN: usize = 32;
const SIGNAL_DIR: &str = "signals";

pub fn encode_signal(epoch: &SignalEpoch) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * epoch.data().len() + 4);
    buf.extend_from_slice(&SIGNAL_MAGIC);
    buf.extend_from_slice(&(epoch.n_channels() as u32).to_le_bytes());
    buf.extend_from_slice(&(epoch.n_samples() as u32).to_le_bytes());
    buf.extend_from_slice(&epoch.sample_rate_hz().to_le_bytes());
    for v in epoch.data() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let crc = crc32fast::hash(&buf[16..]);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

/// Parses a signal file image. Channels get generic names; see [`read_dataset`].
pub fn decode_signal(bytes: &[u8], path: &Path) -> Result<SignalEpoch> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::format(path, Some(bytes.len()), "file shorter than header"));
    }
    if bytes[..16] != SIGNAL_MAGIC {
        return Err(Error::format(path, Some(0), "bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let n_ch = u32_at(16) as usize;
    let n_samp = u32_at(20) as usize;
    let fs = f64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes"));
    let expected = n_ch
        .checked_mul(n_samp)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN + 4))
        .ok_or_else(|| Error::format(path, Some(16), "header sizes overflow"))?;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            Some(bytes.len().min(expected)),
            format!("expected {expected} bytes for {n_ch}x{n_samp} samples, found {}", bytes.len()),
        ));
    }
    let body_end = bytes.len() - 4;
    let stored = u32_at(body_end);
    let computed = crc32fast::hash(&bytes[16..body_end]);
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    if n_ch == 0 || n_samp == 0 || !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::format(path, Some(16), "empty signal or invalid sample rate"));
    }
    let data = bytes[HEADER_LEN..body_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    SignalEpoch::new(data, n_ch, fs, (0..n_ch).map(|c| format!("ch{c}")).collect()).map_err(|e| Error::format(path, None, e.to_string()))
}

pub fn write_signal(epoch: &SignalEpoch, path: &Path) -> Result<()> {
    fs::write(path, encode_signal(epoch))?;
    Ok(())
}

pub fn read_signal(path: &Path) -> Result<SignalEpoch> {
    let bytes = fs::read(path).map_err(|e| Error::format(path, None, e.to_string()))?;
    decode_signal(&bytes, path)
}

/// How a reference EMG channel stored in the files is handled on read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceMode {
    /// Remove the reference channel.
    #[default]
    Drop,
    /// Subtract it from every other EMG channel, then remove it.
    Subtract,
}

impl fmt::Display for ReferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReferenceMode::Drop => "drop",
            ReferenceMode::Subtract => "subtract",
        })
    }
}

impl FromStr for ReferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(ReferenceMode::Drop),
            "subtract" => Ok(ReferenceMode::Subtract),
            other => Err(Error::InvalidParameter(format!("unknown reference mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialEntry {
    pub trial_id: String,
    pub paradigm: Paradigm,
    pub class_label: Option<GraspClass>,
    /// Relative to the dataset directory.
    pub eeg_file: String,
    pub emg_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub version: u32,
    pub sample_rate_hz: f64,
    pub eeg_channel_names: Vec<String>,
    /// Names of every channel stored in the EMG files, reference included.
    pub emg_channel_names: Vec<String>,
    pub reference_emg_channel: Option<usize>,
    pub reference_mode: ReferenceMode,
    pub trial_entries: Vec<TrialEntry>,
}

fn valid_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '/')) && !s.contains("..")
}

fn names_field(names: &[String]) -> String {
    names.join(",")
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut entries: Vec<(&str, String)> = vec![
            ("version", self.version.to_string()),
            ("sample_rate_hz", format!("{:?}", self.sample_rate_hz)),
            ("eeg_channel_names", names_field(&self.eeg_channel_names)),
            ("emg_channel_names", names_field(&self.emg_channel_names)),
        ];
        if let Some(r) = self.reference_emg_channel {
            entries.push(("reference_emg_channel", r.to_string()));
            entries.push(("reference_emg_mode", self.reference_mode.to_string()));
        }
        for t in &self.trial_entries {
            entries.push((
                "trial",
                format!(
                    "{} {} {} {} {}",
                    t.trial_id,
                    t.paradigm.as_str(),
                    t.class_label.map_or("unlabeled", GraspClass::as_str),
                    t.eeg_file,
                    t.emg_file.as_deref().unwrap_or("none")
                ),
            ));
        }
        format_kv(entries)
    }

    /// Reads and validates a manifest; referenced files must exist next to it.
    pub fn read(path: &Path) -> Result<Self> {
        let entries = read_kv(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut version = None;
        let mut fs_hz = None;
        let mut eeg_names = None;
        let mut emg_names = None;
        let mut reference = None;
        let mut mode = ReferenceMode::default();
        let mut trials = Vec::new();
        let mut seen = BTreeSet::new();
        let split_names = |v: &str| -> Vec<String> { v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect() };
        for e in &entries {
            let bad = |m: String| Error::format(path, Some(e.line), m);
            match e.key.as_str() {
                "version" => {
                    let v: u32 = parse_value(e, path)?;
                    if v > MANIFEST_VERSION {
                        return Err(Error::VersionMismatch {
                            found: v,
                            supported: MANIFEST_VERSION,
                        });
                    }
                    version = Some(v);
                }
                "sample_rate_hz" => {
                    let v: f64 = parse_value(e, path)?;
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(bad(format!("invalid sample rate {v}")));
                    }
                    fs_hz = Some(v);
                }
                "eeg_channel_names" => eeg_names = Some(split_names(&e.value)),
                "emg_channel_names" => emg_names = Some(split_names(&e.value)),
                "reference_emg_channel" => reference = Some(parse_value::<usize>(e, path)?),
                "reference_emg_mode" => mode = e.value.parse().map_err(|err: Error| bad(err.to_string()))?,
                "trial" => {
                    let f: Vec<&str> = e.value.split_whitespace().collect();
                    if f.len() != 5 {
                        return Err(bad(format!("trial line needs 5 fields, found {}", f.len())));
                    }
                    if !valid_token(f[0]) || !seen.insert(f[0].to_string()) {
                        return Err(bad(format!("invalid or duplicate trial id `{}`", f[0])));
                    }
                    let paradigm: Paradigm = f[1].parse().map_err(|err: Error| bad(err.to_string()))?;
                    let class_label = match f[2] {
                        "unlabeled" => None,
                        c => Some(c.parse::<GraspClass>().map_err(|err: Error| bad(err.to_string()))?),
                    };
                    let emg_file = (f[4] != "none").then(|| f[4].to_string());
                    for file in std::iter::once(f[3]).chain(emg_file.as_deref()) {
                        if !valid_token(file) {
                            return Err(bad(format!("invalid file name `{file}`")));
                        }
                        if !dir.join(file).is_file() {
                            return Err(bad(format!("referenced file `{file}` does not exist")));
                        }
                    }
                    trials.push(TrialEntry {
                        trial_id: f[0].to_string(),
                        paradigm,
                        class_label,
                        eeg_file: f[3].to_string(),
                        emg_file,
                    });
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::format(path, None, format!("missing `{k}`"));
        let eeg_channel_names = eeg_names.ok_or_else(|| missing("eeg_channel_names"))?;
        let emg_channel_names = emg_names.ok_or_else(|| missing("emg_channel_names"))?;
        if eeg_channel_names.is_empty() || emg_channel_names.is_empty() {
            return Err(Error::format(path, None, "channel name lists must be non-empty"));
        }
        if let Some(r) = reference {
            if r >= emg_channel_names.len() {
                return Err(Error::format(path, None, format!("reference channel {r} out of range")));
            }
        }
        Ok(Self {
            version: version.ok_or_else(|| missing("version"))?,
            sample_rate_hz: fs_hz.ok_or_else(|| missing("sample_rate_hz"))?,
            eeg_channel_names,
            emg_channel_names,
            reference_emg_channel: reference,
            reference_mode: mode,
            trial_entries: trials,
        })
    }
}

fn file_name(id: &str, kind: &str) -> String {
    format!("{SIGNAL_DIR}/{id}.{kind}.bin")
}

/// Writes every trial into `directory` (created if needed) and returns the manifest.
pub fn write_dataset(trials: &[Trial], directory: &Path) -> Result<DatasetManifest> {
    let first = trials.first().ok_or(Error::EmptyInput)?;
    let fs_hz = first.eeg.sample_rate_hz();
    let n_eeg = first.eeg.n_channels();
    let eeg_names = channel_names_or_default(first.eeg.channel_names(), n_eeg, "eeg");
    let emg_ref = trials.iter().find_map(|t| t.emg.as_ref());
    let emg_names = match emg_ref {
        Some(e) => channel_names_or_default(e.channel_names(), e.n_channels(), "emg"),
        None => ARM_MUSCLES.iter().map(|s| s.to_string()).collect(),
    };
    let mut ids = BTreeSet::new();
    for t in trials {
        if !valid_token(&t.id) || t.id.contains('/') || !ids.insert(t.id.as_str()) {
            return Err(Error::InvalidParameter(format!("invalid or duplicate trial id `{}`", t.id)));
        }
        if t.eeg.sample_rate_hz() != fs_hz || t.eeg.n_channels() != n_eeg {
            return Err(Error::DimensionMismatch(format!("trial {} differs in EEG rate or channel count", t.id)));
        }
        if let Some(e) = &t.emg {
            if e.n_channels() != emg_names.len() {
                return Err(Error::DimensionMismatch(format!("trial {} differs in EMG channel count", t.id)));
            }
        }
    }
    fs::create_dir_all(directory.join(SIGNAL_DIR))?;
    let mut entries = Vec::with_capacity(trials.len());
    for t in trials {
        let eeg_file = file_name(&t.id, "eeg");
        write_signal(&t.eeg, &directory.join(&eeg_file))?;
        let emg_file = match &t.emg {
            Some(e) => {
                let f = file_name(&t.id, "emg");
                write_signal(e, &directory.join(&f))?;
                Some(f)
            }
            None => None,
        };
        entries.push(TrialEntry {
            trial_id: t.id.clone(),
            paradigm: t.paradigm,
            class_label: t.class_label,
            eeg_file,
            emg_file,
        });
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        sample_rate_hz: fs_hz,
        eeg_channel_names: eeg_names,
        emg_channel_names: emg_names,
        reference_emg_channel: None,
        reference_mode: ReferenceMode::Drop,
        trial_entries: entries,
    };
    fs::write(directory.join(MANIFEST_FILE), manifest.to_text())?;
    Ok(manifest)
}

fn channel_names_or_default(names: &[String], n: usize, prefix: &str) -> Vec<String> {
    if names.len() == n && names.iter().all(|s| !s.is_empty() && !s.contains(',') && s.trim() == s) {
        names.to_vec()
    } else {
        (0..n).map(|c| format!("{prefix}{c}")).collect()
    }
}

fn with_names(epoch: SignalEpoch, names: &[String], path: &Path) -> Result<SignalEpoch> {
    if epoch.n_channels() != names.len() {
        return Err(Error::format(
            path,
            Some(16),
            format!("{} channels but the manifest names {}", epoch.n_channels(), names.len()),
        ));
    }
    let n = epoch.n_channels();
    SignalEpoch::new(epoch.data().to_vec(), n, epoch.sample_rate_hz(), names.to_vec())
}

fn apply_reference(emg: SignalEpoch, reference: usize, mode: ReferenceMode, names: &[String]) -> Result<SignalEpoch> {
    let r = emg.channel(reference).to_vec();
    let channels: Vec<Vec<f64>> = emg
        .channels()
        .enumerate()
        .filter(|(c, _)| *c != reference)
        .map(|(_, ch)| match mode {
            ReferenceMode::Drop => ch.to_vec(),
            ReferenceMode::Subtract => ch.iter().zip(&r).map(|(x, y)| x - y).collect(),
        })
        .collect();
    let kept = names.iter().enumerate().filter(|(c, _)| *c != reference).map(|(_, s)| s.clone()).collect();
    SignalEpoch::from_channels(channels, emg.sample_rate_hz(), kept)
}

pub fn read_manifest(directory: &Path) -> Result<DatasetManifest> {
    let path = directory.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::format(&path, None, "manifest not found"));
    }
    DatasetManifest::read(&path)
}

/// Reads a dataset written by [`write_dataset`] (or by hand in the same format).
pub fn read_dataset(directory: &Path) -> Result<Vec<Trial>> {
    let manifest = read_manifest(directory)?;
    let manifest_path = directory.join(MANIFEST_FILE);
    manifest
        .trial_entries
        .iter()
        .map(|e| {
            let eeg_path = directory.join(&e.eeg_file);
            let eeg = with_names(read_signal(&eeg_path)?, &manifest.eeg_channel_names, &eeg_path)?;
            if eeg.sample_rate_hz() != manifest.sample_rate_hz {
                return Err(Error::format(
                    &eeg_path,
                    Some(24),
                    format!("sample rate {} differs from manifest {}", eeg.sample_rate_hz(), manifest.sample_rate_hz),
                ));
            }
            let emg = match &e.emg_file {
                None => None,
                Some(f) => {
                    let p = directory.join(f);
                    let emg = with_names(read_signal(&p)?, &manifest.emg_channel_names, &p)?;
                    Some(match manifest.reference_emg_channel {
                        Some(r) => apply_reference(emg, r, manifest.reference_mode, &manifest.emg_channel_names)?,
                        None => emg,
                    })
                }
            };
            Trial::new(e.trial_id.clone(), eeg, emg, e.paradigm, e.class_label)
                .map_err(|err| Error::format(&manifest_path, None, err.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn epoch(n_ch: usize, n: usize) -> SignalEpoch {
        let ch = (0..n_ch).map(|c| (0..n).map(|i| ((i * (c + 1)) as f32 * 0.25) as f64).collect()).collect();
        SignalEpoch::unnamed(ch, 250.0).unwrap()
    }

    #[test]
    fn signal_round_trip_and_corruption() {
        let e = epoch(3, 50);
        let bytes = encode_signal(&e);
        assert_eq!(&bytes[..8], b"GRSPDAT1");
        let back = decode_signal(&bytes, Path::new("s")).unwrap();
        assert_eq!(back.data(), e.data());
        let mut bad = bytes.clone();
        bad[40] ^= 1;
        assert!(matches!(decode_signal(&bad, Path::new("s")), Err(Error::ChecksumMismatch { .. })));
        assert!(matches!(decode_signal(&bytes[..bytes.len() - 7], Path::new("s")), Err(Error::Format { .. })));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(decode_signal(&magic, Path::new("s")), Err(Error::Format { location: Some(0), .. })));
    }

    #[test]
    fn reference_modes() {
        let e = SignalEpoch::unnamed(vec![vec![1.0, 2.0], vec![10.0, 20.0], vec![0.5, 0.5]], 250.0).unwrap();
        let names: Vec<String> = ["a", "b", "r"].iter().map(|s| s.to_string()).collect();
        let d = apply_reference(e.clone(), 2, ReferenceMode::Drop, &names).unwrap();
        assert_eq!(d.data(), &[1.0, 2.0, 10.0, 20.0]);
        let s = apply_reference(e, 2, ReferenceMode::Subtract, &names).unwrap();
        assert_eq!(s.data(), &[0.5, 1.5, 9.5, 19.5]);
        assert_eq!(s.channel_names(), &["a".to_string(), "b".to_string()]);
    }
}
