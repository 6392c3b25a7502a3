use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;

/// Everything needed to regenerate the files listed in `outputs`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub command_line: Vec<String>,
    pub parameters: Value,
    pub seeds: Vec<u64>,
    pub config_digest: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub outputs: Vec<PathBuf>,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(subcommand: &str, parameters: Value, config_digest: String) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            command_line: std::env::args().collect(),
            parameters,
            seeds: Vec::new(),
            config_digest,
            started_at: now(),
            finished_at: None,
            outputs: Vec::new(),
        }
    }

    pub fn write(mut self, dir: &Path) -> anyhow::Result<PathBuf> {
        self.finished_at = Some(now());
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
