use anyhow::bail;
use clap::Args;
use sensorlab::classifiers::{feature_importances, fit, ClassifierKind};
use sensorlab::dataset::build_feature_dataset;
use serde_json::json;

use super::{base_echo, classifier_config, input_path, load, missing_policy, output_dir, ModelFlags, DEFAULT_SEED};
use crate::config::{pick, FileConfig};
use crate::report::envelope;
use crate::Common;

#[derive(Args, Debug)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub common: Common,
    /// dt or rf.
    #[arg(long)]
    pub model: Option<String>,
    #[command(flatten)]
    pub flags: ModelFlags,
}

pub fn run(args: ImportanceArgs, file: &FileConfig) -> anyhow::Result<()> {
    let policy = missing_policy(&args.common, file)?;
    let loaded = load(&input_path(&args.common, file)?, policy)?;
    let seed = pick(args.common.seed, &file.seed, DEFAULT_SEED);
    let name = pick(args.model, &file.model, "dt".into());
    let kind: ClassifierKind = name.parse()?;
    if !matches!(kind, ClassifierKind::Dt | ClassifierKind::Rf) {
        bail!("importance needs a tree model (dt or rf), got `{name}`");
    }
    let mut echo = base_echo(&loaded, Some(seed), policy);
    echo.model = Some(kind.name().into());
    let config = classifier_config(&args.flags, file, seed, &mut echo)?;

    let data = build_feature_dataset(&loaded.records)?;
    let model = fit(kind, &data, &config)?;
    let importances = feature_importances(&model, data.feature_names())?;
    let ranked: Vec<_> = importances
        .ranked()
        .into_iter()
        .map(|(feature, score)| json!({ "feature": feature, "score": score }))
        .collect();
    for (feature, score) in importances.ranked() {
        println!("{feature:>8} {score:.6}");
    }

    let out = output_dir(&args.common)?;
    let report = envelope(
        "importance",
        Some(loaded.sha256.clone()),
        Some(seed),
        json!({
            "model": kind.name(),
            "rows": data.n_rows(),
            "hyperparameters": config,
            "importances": ranked,
            "total": importances.scores.iter().sum::<f64>(),
        }),
    )?;
    out.write_report("importance", &report)?;
    out.write_config("importance", &echo)?;
    Ok(())
}
