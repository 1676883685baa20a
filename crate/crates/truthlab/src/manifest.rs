//! Run manifests. Reports point at their manifest by file name; the
//! manifest carries everything needed to replay the run, plus the start
//! time, which is kept out of reports so replays compare byte for byte.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    /// Resolved inputs of the run.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<String>,
    pub started_unix_ms: u128,
}

impl RunManifest {
    pub fn new(
        command: &str,
        args: Vec<String>,
        config: serde_json::Value,
        seed: Option<u64>,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            args,
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        }
    }
}

/// `<out>.manifest.json` next to the output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn manifest_name(out: &Path) -> String {
    manifest_path(out)
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
