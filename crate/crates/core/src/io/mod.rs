//! Persistence: key-value text, binary signal datasets, models and synthetic-data configs.

pub mod config;
pub mod dataset;
pub mod kv;
pub mod model;

pub use config::{read_synth_config, synth_config_from_kv};
pub use dataset::{read_dataset, read_manifest, write_dataset, DatasetManifest, ReferenceMode, TrialEntry};
pub use kv::{format_kv, parse_kv, KvEntry};
pub use model::{deserialize_model, serialize_model, SavedModel};
