use anyhow::bail;
use clap::Args;
use sensorlab::classifiers::{fit, ClassifierKind};
use sensorlab::dataset::{build_time_dataset, parse_timestamp, timestamp_to_epoch, TimeReference};
use sensorlab::evaluation::holdout_split;
use serde_json::json;

use super::{base_echo, classifier_config, input_path, load, missing_policy, output_dir, ModelFlags, DEFAULT_SEED};
use crate::config::{pick, pick_required, FileConfig};
use crate::report::envelope;
use crate::Common;

#[derive(Args, Debug)]
pub struct PredictTimeArgs {
    #[command(flatten)]
    pub common: Common,
    /// dt, knn, nb or rf.
    #[arg(long)]
    pub classifier: Option<String>,
    /// Timestamp to classify, `YYYY-MM-DD HH:MM:SS[.ffffff]`.
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Offset of the recorded local time from UTC.
    #[arg(long, allow_hyphen_values = true)]
    pub utc_offset_seconds: Option<i32>,
    #[command(flatten)]
    pub flags: ModelFlags,
}

pub fn run(args: PredictTimeArgs, file: &FileConfig) -> anyhow::Result<()> {
    let policy = missing_policy(&args.common, file)?;
    let seed = pick(args.common.seed, &file.seed, DEFAULT_SEED);
    let name = pick(args.classifier, &file.classifier, "dt".into());
    let kind: ClassifierKind = name.parse()?;
    if !matches!(kind, ClassifierKind::Dt | ClassifierKind::Knn | ClassifierKind::Nb | ClassifierKind::Rf) {
        bail!("predict-time supports dt, knn, nb and rf, got `{name}`");
    }
    let query_text = pick_required(args.query, &file.query, "query")?;
    let zone = TimeReference {
        utc_offset_seconds: pick(args.utc_offset_seconds, &file.utc_offset_seconds, 0),
    };
    let query = parse_timestamp(&query_text)?;
    let query_epoch = timestamp_to_epoch(&query, zone)?;
    let fraction = pick(args.test_fraction, &file.test_fraction, 0.2);

    let loaded = load(&input_path(&args.common, file)?, policy)?;
    let mut echo = base_echo(&loaded, Some(seed), policy);
    echo.classifier = Some(kind.name().into());
    echo.query = Some(query_text.clone());
    echo.test_fraction = Some(fraction);
    echo.utc_offset_seconds = Some(zone.utc_offset_seconds);
    let config = classifier_config(&args.flags, file, seed, &mut echo)?;

    let data = build_time_dataset(&loaded.records, zone)?;
    let split = holdout_split(&data, fraction, seed, true)?;
    for w in &split.warnings {
        log::warn!("{w}");
    }
    let model = fit(kind, &split.train, &config)?;
    let predicted = model.predict(split.test.features())?;
    let correct = predicted.iter().zip(split.test.labels()).filter(|(p, a)| p == a).count();
    let accuracy = if predicted.is_empty() { 0.0 } else { correct as f64 / predicted.len() as f64 };
    let person = &split.train.label_names()[model.predict_row(&[query_epoch])];
    println!("{person}");
    log::info!("holdout accuracy {accuracy:.4} on {} rows", predicted.len());

    let out = output_dir(&args.common)?;
    let report = envelope(
        "predict_time",
        Some(loaded.sha256.clone()),
        Some(seed),
        json!({
            "classifier": kind.name(),
            "query": query_text,
            "query_epoch_seconds": query_epoch,
            "predicted_person": person,
            "holdout_accuracy": accuracy,
            "test_fraction": fraction,
            "train_rows": split.train.n_rows(),
            "test_rows": split.test.n_rows(),
            "warnings": split.warnings,
            "hyperparameters": config,
        }),
    )?;
    out.write_report("predict_time", &report)?;
    out.write_config("predict_time", &echo)?;
    Ok(())
}
