//! Versioned model files.
//!
//! A model file is one JSON object:
//! `{"format_version", "model_type", "params", "payload"}`. Floats use the
//! round-trip representation, so a reloaded model predicts bit-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{Classifier, Model, ModelFamily, ModelParams};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    format_version: u64,
    model_type: String,
    params: Value,
    payload: Value,
}

pub fn model_to_json(model: &Model, params: &ModelParams) -> Result<String> {
    if model.family() != params.family() {
        return Err(Error::InvalidInput(format!(
            "parameters for {} saved with a {} model",
            params.family().key(),
            model.family().key()
        )));
    }
    let envelope = Envelope {
        format_version: FORMAT_VERSION,
        model_type: model.family().key().to_string(),
        params: params.params_json()?,
        payload: model.payload_json()?,
    };
    let mut text = serde_json::to_string(&envelope)?;
    text.push('\n');
    Ok(text)
}

pub fn model_from_json(text: &str) -> Result<(Model, ModelParams)> {
    let raw: Value = serde_json::from_str(text)?;
    let version = raw
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::InvalidInput("model file has no format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let envelope: Envelope = serde_json::from_value(raw)?;
    let family: ModelFamily = envelope.model_type.parse()?;
    let params = ModelParams::from_family_json(family, envelope.params)?;
    let model = Model::from_payload_json(family, envelope.payload)?;
    if model.n_classes() < 2 || model.n_features() == 0 {
        return Err(Error::InvalidInput(
            "model file describes an empty model".into(),
        ));
    }
    Ok((model, params))
}

pub fn save_model(path: &Path, model: &Model, params: &ModelParams) -> Result<()> {
    let text = model_to_json(model, params)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(Model, ModelParams)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
