pub mod evaluate;
pub mod forecast;
pub mod generate;
pub mod importance;
pub mod predict_time;
pub mod simulate;
pub mod validate;

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use sensorlab::classifiers::{ClassifierConfig, Criterion};
use sensorlab::dataset::{handle_missing, parse_partial_records, MissingPolicy, SensorRecord};

use crate::config::{pick, pick_required, FileConfig};
use crate::report::{sha256_file, OutputDir};
use crate::Common;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUTPUT_DIR: &str = "sensorlab_out";

/// Input file, its digest and the parsed records.
pub struct Loaded {
    pub path: PathBuf,
    pub sha256: String,
    pub records: Vec<SensorRecord>,
}

pub fn input_path(common: &Common, file: &FileConfig) -> anyhow::Result<PathBuf> {
    pick_required(common.input.clone(), &file.input, "input")
}

pub fn missing_policy(common: &Common, file: &FileConfig) -> anyhow::Result<MissingPolicy> {
    match pick(common.missing.clone(), &file.missing, "drop_row".into()).as_str() {
        "drop_row" => Ok(MissingPolicy::DropRow),
        "impute_mean" => Ok(MissingPolicy::ImputeMean),
        other => bail!("unknown missing-value policy `{other}`; expected drop_row or impute_mean"),
    }
}

pub fn load(path: &Path, policy: MissingPolicy) -> anyhow::Result<Loaded> {
    let sha256 = sha256_file(path)?;
    let reader = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let partial = parse_partial_records(reader).with_context(|| format!("reading {}", path.display()))?;
    let records = handle_missing(partial, policy)?;
    if records.is_empty() {
        bail!("{} contains no usable records", path.display());
    }
    Ok(Loaded {
        path: path.to_path_buf(),
        sha256,
        records,
    })
}

pub fn output_dir(common: &Common) -> anyhow::Result<OutputDir> {
    OutputDir::create(common.output_dir.as_deref().unwrap_or(Path::new(DEFAULT_OUTPUT_DIR)))
}

/// Echo of the settings shared by every data-reading command.
pub fn base_echo(loaded: &Loaded, seed: Option<u64>, policy: MissingPolicy) -> FileConfig {
    FileConfig {
        input: Some(loaded.path.clone()),
        seed,
        missing: Some(
            match policy {
                MissingPolicy::DropRow => "drop_row",
                MissingPolicy::ImputeMean => "impute_mean",
            }
            .into(),
        ),
        ..Default::default()
    }
}

#[derive(clap::Args, Debug, Clone, Default)]
pub struct ModelFlags {
    /// Neighbours for knn.
    #[arg(long)]
    pub knn_k: Option<usize>,
    /// Trees for rf.
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Depth limit for dt and rf.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Split criterion for dt and rf: gini or entropy.
    #[arg(long)]
    pub criterion: Option<String>,
}

/// Classifier hyperparameters from flags, file and defaults; the resolved
/// values are also written into `echo`.
pub fn classifier_config(flags: &ModelFlags, file: &FileConfig, seed: u64, echo: &mut FileConfig) -> anyhow::Result<ClassifierConfig> {
    let mut config = ClassifierConfig::default().with_seed(seed);
    config.knn_k = pick(flags.knn_k, &file.knn_k, config.knn_k);
    config.forest.n_trees = pick(flags.n_trees, &file.n_trees, config.forest.n_trees);
    config.tree.max_depth = pick(flags.max_depth, &file.max_depth, config.tree.max_depth);
    let criterion = pick(flags.criterion.clone(), &file.criterion, "gini".into());
    config.tree.criterion = match criterion.as_str() {
        "gini" => Criterion::Gini,
        "entropy" => Criterion::Entropy,
        other => bail!("unknown criterion `{other}`; expected gini or entropy"),
    };
    config.forest.tree = config.tree;
    echo.knn_k = Some(config.knn_k);
    echo.n_trees = Some(config.forest.n_trees);
    echo.max_depth = Some(config.tree.max_depth);
    echo.criterion = Some(criterion);
    Ok(config)
}
