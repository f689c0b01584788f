use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Conventions that the paper leaves open, recorded with every run.
pub const CONVENTIONS: [&str; 3] = [
    "sampling interval is 1",
    "M defaults to K when not given",
    "verification signal length L defaults to 4K",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(rename = "K", skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub a: Option<usize>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none", default)]
    pub m: Option<usize>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none", default)]
    pub l: Option<usize>,
    /// As given on the command line, e.g. `"14/512"`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_max_numerator: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub imax: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub init: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub num_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub parameters: Parameters,
    pub tool_version: String,
    /// Unix seconds; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
    pub outputs: Vec<String>,
    pub conventions: Vec<String>,
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, parameters: Parameters) -> Self {
        RunManifest {
            command: command.to_string(),
            argv: std::env::args().collect(),
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp(),
            outputs: Vec::new(),
            conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn validate(&self) -> CliResult<()> {
        const COMMANDS: [&str; 5] = ["slepian", "design", "sweep", "analyze", "verify"];
        if !COMMANDS.contains(&self.command.as_str()) {
            return Err(CliError::Io(format!("unknown command {:?} in manifest", self.command)));
        }
        if self.outputs.is_empty() {
            return Err(CliError::Io("manifest lists no outputs".into()));
        }
        Ok(())
    }
}
