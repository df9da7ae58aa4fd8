use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::FileConfig;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Wraps a command payload with the fields every report carries.
pub fn envelope(command: &str, input_sha256: Option<String>, seed: Option<u64>, payload: impl Serialize) -> anyhow::Result<Value> {
    let mut map = Map::new();
    map.insert("toolkit_version".into(), json!(TOOLKIT_VERSION));
    map.insert("command".into(), json!(command));
    map.insert("input_sha256".into(), json!(input_sha256));
    map.insert("seed".into(), json!(seed));
    match serde_json::to_value(payload)? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("result".into(), other);
        }
    }
    Ok(Value::Object(map))
}

pub struct OutputDir {
    path: PathBuf,
}

impl OutputDir {
    pub fn create(path: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(path).with_context(|| format!("creating output directory {}", path.display()))?;
        Ok(OutputDir { path: path.to_path_buf() })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.file(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_report(&self, command: &str, report: &Value) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(report)?;
        text.push('\n');
        self.write(&format!("{command}.json"), &text)
    }

    pub fn write_config(&self, command: &str, config: &FileConfig) -> anyhow::Result<PathBuf> {
        self.write(&format!("{command}.config.toml"), &config.to_toml()?)
    }
}
