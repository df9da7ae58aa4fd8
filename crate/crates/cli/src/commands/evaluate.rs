use clap::Args;
use sensorlab::classifiers::{fit, ClassifierKind};
use sensorlab::dataset::build_feature_dataset;
use sensorlab::evaluation::{cross_validate, stratified_kfold, CvOptions};
use serde_json::json;

use super::{base_echo, classifier_config, input_path, load, missing_policy, output_dir, ModelFlags, DEFAULT_SEED};
use crate::config::{pick, FileConfig};
use crate::report::envelope;
use crate::Common;

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// dt, rf, gb, knn, nb or lr.
    #[arg(long)]
    pub classifier: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Skip per-fold min-max scaling.
    #[arg(long)]
    pub no_scale: bool,
    #[command(flatten)]
    pub model: ModelFlags,
}

pub fn run(args: EvaluateArgs, file: &FileConfig) -> anyhow::Result<()> {
    let policy = missing_policy(&args.common, file)?;
    let loaded = load(&input_path(&args.common, file)?, policy)?;
    let seed = pick(args.common.seed, &file.seed, DEFAULT_SEED);
    let name = pick(args.classifier, &file.classifier, "dt".into());
    let kind: ClassifierKind = name.parse()?;
    let k = pick(args.folds, &file.folds, 5);
    let scale = !args.no_scale && file.scale.unwrap_or(true);

    let mut echo = base_echo(&loaded, Some(seed), policy);
    echo.classifier = Some(kind.name().into());
    echo.folds = Some(k);
    echo.scale = Some(scale);
    let config = classifier_config(&args.model, file, seed, &mut echo)?;

    let data = build_feature_dataset(&loaded.records)?;
    let folds = stratified_kfold(data.labels(), k, seed)?;
    let options = CvOptions {
        scale: scale.then_some((0.0, 1.0)),
    };
    let cv = cross_validate(|train| fit(kind, train, &config), &data, &folds, &options)?;
    println!(
        "{}: macro P {:.4} R {:.4} F1 {:.4}, accuracy {:.4} over {k} folds",
        kind, cv.macro_precision.mean, cv.macro_recall.mean, cv.macro_f1.mean, cv.accuracy.mean
    );

    let out = output_dir(&args.common)?;
    let report = envelope(
        "evaluate",
        Some(loaded.sha256.clone()),
        Some(seed),
        json!({
            "classifier": kind.name(),
            "folds": k,
            "rows": data.n_rows(),
            "features": data.feature_names(),
            "classes": data.label_names(),
            "scaled": scale,
            "hyperparameters": config,
            "macro_precision": cv.macro_precision,
            "macro_recall": cv.macro_recall,
            "macro_f1": cv.macro_f1,
            "accuracy": cv.accuracy,
            "per_fold": cv.folds,
        }),
    )?;
    out.write_report("evaluate", &report)?;
    out.write_config("evaluate", &echo)?;
    Ok(())
}
