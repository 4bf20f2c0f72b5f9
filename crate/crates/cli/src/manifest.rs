use std::fs;
use std::path::Path;

use anyhow::Result;
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// One command that wrote into the directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub files: Vec<OutputFile>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub entries: Vec<ManifestEntry>,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Records `files` (relative to `dir`) under `command`, replacing an earlier
/// entry of the same command.
pub fn record(dir: &Path, command: &str, config_digest: &str, seed: u64, started_at: String, files: &[String]) -> Result<()> {
    let path = dir.join(FILE_NAME);
    let mut m: RunManifest = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => RunManifest::default(),
    };
    m.code_version = env!("CARGO_PKG_VERSION").to_string();
    let files = files
        .iter()
        .map(|f| {
            Ok(OutputFile {
                path: f.clone(),
                sha256: sha256_file(&dir.join(f))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    m.entries.retain(|e| e.command != command);
    m.entries.push(ManifestEntry {
        command: command.to_string(),
        config_digest: config_digest.to_string(),
        seed,
        started_at,
        finished_at: now(),
        files,
    });
    fs::write(&path, serde_json::to_string_pretty(&m)?)?;
    Ok(())
}
