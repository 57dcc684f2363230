//! Versioned JSON model files:
//! `{format_version, spec, columns, parameters, metadata}`.
//! Floats are written with shortest round-trip formatting, so a reloaded
//! model predicts bit-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainedModel;
use crate::error::ModelError;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize)]
struct EnvelopeRef<'a> {
    format_version: u64,
    #[serde(flatten)]
    model: &'a TrainedModel,
}

#[derive(Deserialize)]
struct Envelope {
    #[allow(dead_code)]
    format_version: u64,
    #[serde(flatten)]
    model: TrainedModel,
}

pub fn to_json(model: &TrainedModel) -> Result<String, ModelError> {
    serde_json::to_string_pretty(&EnvelopeRef {
        format_version: FORMAT_VERSION,
        model,
    })
    .map_err(|e| ModelError::Corrupt(e.to_string()))
}

pub fn from_json(text: &str) -> Result<TrainedModel, ModelError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelError::Corrupt(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ModelError::Corrupt("missing format_version".into()))?;
    if version > FORMAT_VERSION {
        return Err(ModelError::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let env: Envelope = serde_json::from_value(value).map_err(|e| ModelError::Corrupt(e.to_string()))?;
    Ok(env.model)
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ModelError> {
    from_json(&std::fs::read_to_string(path)?)
}
