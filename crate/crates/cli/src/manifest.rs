//! Run manifest written next to every command's outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub rng_seed: u64,
    /// Worker threads; reruns reuse it because parallel reductions depend on it.
    pub threads: usize,
    pub timestamp_unix: u64,
    /// Fully resolved command configuration.
    pub config: Value,
    /// File names relative to the output directory, in write order.
    pub outputs: Vec<String>,
    pub derived: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn new(command: &str, rng_seed: u64, threads: usize, config: Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng_seed,
            threads,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config,
            outputs: Vec::new(),
            derived: BTreeMap::new(),
        }
    }

    pub fn derive(&mut self, key: &str, value: impl Into<Value>) {
        self.derived.insert(key.to_string(), value.into());
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    /// Writes `manifest.json` via a temporary file and rename.
    pub fn write_atomic(&self, out_dir: &Path) -> std::io::Result<()> {
        let tmp = out_dir.join(format!(".{MANIFEST_FILE}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, self).map_err(std::io::Error::other)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(&tmp, out_dir.join(MANIFEST_FILE))
    }
}
