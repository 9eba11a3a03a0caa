//! JSON run configuration, `key=value` overrides and the run manifest.

use std::path::{Path, PathBuf};

use dsgc_core::experiment::ExperimentConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Error, Result};

/// Everything needed to reproduce a run. A manifest is itself accepted as a
/// config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub dataset_path: PathBuf,
    pub output_dir: PathBuf,
    pub command: String,
    pub timestamp: String,
    pub seed: u64,
}

fn config_error(source: &str, e: serde_json::Error) -> Error {
    Error::Config(format!("{source}: {e}"))
}

/// Parses a config from JSON text. An object with both `config` and
/// `command` keys is read as a manifest and its `config` is used.
pub fn parse_config(text: &str, source: &str) -> Result<ExperimentConfig> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| config_error(source, e))?;
    if let Value::Object(map) = &mut value {
        if map.contains_key("command") {
            if let Some(inner) = map.remove("config") {
                value = inner;
            }
        }
    }
    let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| config_error(source, e))?;
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    parse_config(&text, &path.display().to_string())
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("override '{s}' is not key=value")))?;
    Ok((k.trim().to_owned(), v.trim().to_owned()))
}

/// Sets each `key` to `value` (read as JSON, or as a bare string when that
/// fails). Unknown keys are rejected by name.
pub fn apply_overrides(cfg: &ExperimentConfig, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut value = serde_json::to_value(cfg)?;
    let map = value.as_object_mut().expect("config serializes to an object");
    for (key, raw) in overrides {
        let slot = map.get_mut(key).ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?;
        *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
    }
    let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| config_error("override", e))?;
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(cfg)
}
