//! Versioned JSON persistence for trained models.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::BaselineModel;
use crate::error::{Error, Result};
use crate::pipeline::PipelineModel;

pub const MODEL_FORMAT: &str = "grasp-decode-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "lowercase")]
pub enum SavedModel {
    Pipeline(PipelineModel),
    Baseline(BaselineModel),
}

impl SavedModel {
    /// Every trial id the model was fit on.
    pub fn training_trial_ids(&self) -> &[String] {
        match self {
            SavedModel::Pipeline(m) => &m.training_trial_ids,
            SavedModel::Baseline(m) => &m.training_trial_ids,
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    format: &'a str,
    version: u32,
    model: &'a SavedModel,
}

pub fn model_to_string(model: &SavedModel) -> Result<String> {
    serde_json::to_string(&Envelope {
        format: MODEL_FORMAT,
        version: MODEL_VERSION,
        model,
    })
    .map_err(|e| Error::InvalidParameter(format!("model cannot be serialised: {e}")))
}

pub fn model_from_str(text: &str, path: &Path) -> Result<SavedModel> {
    let bad = |loc: Option<usize>, m: String| Error::format(path, loc, m);
    let mut value: Value = serde_json::from_str(text).map_err(|e| bad(Some(e.line()), e.to_string()))?;
    let obj = value.as_object_mut().ok_or_else(|| bad(None, "top level is not an object".into()))?;
    if obj.get("format").and_then(Value::as_str) != Some(MODEL_FORMAT) {
        return Err(bad(None, format!("missing or wrong `format` (expected `{MODEL_FORMAT}`)")));
    }
    let version = obj
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| bad(None, "missing `version`".into()))?;
    if version > MODEL_VERSION as u64 {
        return Err(Error::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            supported: MODEL_VERSION,
        });
    }
    let model = obj.remove("model").ok_or_else(|| bad(None, "missing `model`".into()))?;
    serde_json::from_value(model).map_err(|e| bad(None, e.to_string()))
}

pub fn serialize_model(model: &SavedModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_string(model)?)?;
    Ok(())
}

pub fn deserialize_model(path: &Path) -> Result<SavedModel> {
    let bytes = fs::read(path).map_err(|e| Error::format(path, None, e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::format(path, Some(e.utf8_error().valid_up_to()), "not valid UTF-8"))?;
    model_from_str(&text, path)
}
