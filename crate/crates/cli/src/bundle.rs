//! Run-bundle conventions: file names, endpoint slugs, label display.
//!
//! A bundle directory holds `spec.*`, `suite-<label>-<slug>.json`,
//! `trace-<label>-<slug>.json`, `results-<label>.json`, `log-<label>.ndjson`
//! and `report.json|md|csv`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use restamp_core::agents::{TraceEntry, WorkflowTrace};

use crate::CliError;

/// File-system-safe slug for an endpoint template.
pub fn endpoint_slug(endpoint: &str) -> String {
    let mut slug: String = endpoint
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    while slug.contains("--") {
        slug = slug.replace("--", "-");
    }
    slug.trim_matches('-').to_string()
}

/// Canonical display name for a configuration label.
pub fn display_label(label: &str) -> String {
    match label {
        "initial" => "Initial".to_string(),
        "single" => "Single-Agent".to_string(),
        "multi" => "Multi-Agent".to_string(),
        other => other.to_string(),
    }
}

/// The persisted form of one workflow run's trace.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceFile {
    pub endpoint: String,
    pub mode: String,
    pub repair_rounds: usize,
    pub repair_limit_hit: bool,
    pub entries: Vec<TraceEntry>,
}

impl TraceFile {
    pub fn new(endpoint: &str, mode: &str, repair_rounds: usize, repair_limit_hit: bool, trace: WorkflowTrace) -> TraceFile {
        TraceFile {
            endpoint: endpoint.to_string(),
            mode: mode.to_string(),
            repair_rounds,
            repair_limit_hit,
            entries: trace.entries,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::config(format!("cannot encode {}: {e}", path.display())))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

/// Files in a directory whose name starts with `prefix` and ends with
/// `suffix`, sorted by name.
pub fn matching_files(dir: &Path, prefix: &str, suffix: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", dir.display())))?;
    for entry in entries {
        let entry = entry.map_err(CliError::config)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with(prefix) && name.ends_with(suffix) {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_flat_and_stable() {
        assert_eq!(endpoint_slug("/items/{itemId}"), "items-itemid");
        assert_eq!(endpoint_slug("/pet/findByStatus"), "pet-findbystatus");
        assert_eq!(endpoint_slug("/"), "");
    }

    #[test]
    fn labels_display_canonically() {
        assert_eq!(display_label("initial"), "Initial");
        assert_eq!(display_label("single"), "Single-Agent");
        assert_eq!(display_label("multi"), "Multi-Agent");
        assert_eq!(display_label("smoke"), "smoke");
    }
}
