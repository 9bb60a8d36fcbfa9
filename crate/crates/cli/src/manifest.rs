use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Completed,
    Failed,
}

/// Written last: its presence means every listed file is complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    /// Relative to the output directory, in write order.
    pub files: Vec<String>,
    pub summaries: BTreeMap<String, Value>,
    pub wall_time_seconds: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<u8>,
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            version: ehrenfest_core::VERSION.to_string(),
            command: command.to_string(),
            config: config.clone(),
            files: Vec::new(),
            summaries: BTreeMap::new(),
            wall_time_seconds: 0.0,
            status: Status::Completed,
            error: None,
            exit_code: None,
        }
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).unwrap_or(Value::Null);
        self.summaries.insert(key.to_string(), value);
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(path.display().to_string(), e))
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("manifest: {e}")))
    }
}
