use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

/// Flat keys accepted in a `--config` file. Command-line flags win over
/// file values, which win over built-in defaults. The same layout is used
/// to echo the effective configuration of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing: Option<String>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knn_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trees: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utc_offset_seconds: Option<i32>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub select: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adf_max_lag: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub granger_lag: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub difference: Option<bool>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derive: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offline: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sink_retries: Option<u32>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Flag, then file value, then default.
pub fn pick<T>(flag: Option<T>, file: &Option<T>, default: T) -> T
where
    T: Clone,
{
    flag.or_else(|| file.clone()).unwrap_or(default)
}

pub fn pick_required<T: Clone>(flag: Option<T>, file: &Option<T>, name: &str) -> anyhow::Result<T> {
    flag.or_else(|| file.clone())
        .with_context(|| format!("missing required setting `{name}` (flag or config key)"))
}

/// Boolean switches are on when either the flag or the file says so.
pub fn switch(flag: bool, file: &Option<bool>) -> bool {
    flag || file.unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), &Some(2), 3), 1);
        assert_eq!(pick(None, &Some(2), 3), 2);
        assert_eq!(pick(None, &None, 3), 3);
        assert!(switch(false, &Some(true)));
        assert!(!switch(false, &None));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("seed = 3\nfolds = 5").is_ok());
        assert!(toml::from_str::<FileConfig>("sed = 3").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = FileConfig {
            seed: Some(7),
            classifier: Some("dt".into()),
            test_fraction: Some(0.25),
            ..Default::default()
        };
        let text = c.to_toml().unwrap();
        assert_eq!(toml::from_str::<FileConfig>(&text).unwrap(), c);
    }
}
