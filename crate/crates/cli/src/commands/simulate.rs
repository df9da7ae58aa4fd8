use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use sensorlab::monitor::{
    derive_thresholds, run_pipeline, summarize_records, EndpointConfig, HttpCloudSink, PipelineParams, RecordSink, Sinks,
    StreamEvent, ThresholdConfig, UreqTransport, WriterSink,
};
use serde_json::json;

use super::{base_echo, input_path, load, missing_policy, output_dir};
use crate::config::{pick, switch, FileConfig};
use crate::report::envelope;
use crate::Common;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// JSON threshold file, e.g. {"Temp":{"low":20,"high":35,"provenance":"manual"}}.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    /// Derive thresholds from the input's IQR fences.
    #[arg(long)]
    pub derive: bool,
    /// Cloud endpoint description (TOML or JSON).
    #[arg(long)]
    pub endpoint: Option<PathBuf>,
    /// Write cloud rows to cloud.csv even when an endpoint is configured.
    #[arg(long)]
    pub offline: bool,
    /// Minimum spacing between accepted events, in seconds.
    #[arg(long)]
    pub interval: Option<f64>,
    /// Extra attempts per failed sink write.
    #[arg(long)]
    pub sink_retries: Option<u32>,
}

fn load_endpoint(path: &Path) -> anyhow::Result<EndpointConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: EndpointConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    config.validate().map_err(anyhow::Error::msg)?;
    Ok(config)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn run(args: SimulateArgs, file: &FileConfig) -> anyhow::Result<()> {
    let policy = missing_policy(&args.common, file)?;
    let loaded = load(&input_path(&args.common, file)?, policy)?;
    let derive = switch(args.derive, &file.derive);
    let thresholds_path = args.thresholds.or_else(|| file.thresholds.clone());
    let endpoint_path = args.endpoint.or_else(|| file.endpoint.clone());
    let offline = switch(args.offline, &file.offline);
    let defaults = PipelineParams::default();
    let params = PipelineParams {
        sampling_interval_seconds: pick(args.interval, &file.interval, defaults.sampling_interval_seconds),
        sink_retries: pick(args.sink_retries, &file.sink_retries, defaults.sink_retries),
    };

    let thresholds = match (&thresholds_path, derive) {
        (Some(_), true) => bail!("use either --thresholds or --derive, not both"),
        (Some(path), false) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let config: ThresholdConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            config.validate()?;
            config
        }
        (None, true) => derive_thresholds(&summarize_records(&loaded.records)?),
        (None, false) => ThresholdConfig::new(),
    };
    let endpoint = match &endpoint_path {
        Some(path) if !offline => Some(load_endpoint(path)?),
        _ => None,
    };

    let out = output_dir(&args.common)?;
    let mut local = WriterSink(create(&out.file("local.csv"))?);
    let mut alerts = WriterSink(create(&out.file("alerts.jsonl"))?);
    let events = loaded.records.iter().cloned().map(StreamEvent::from_record);

    let (stats, deliveries) = match endpoint {
        Some(config) => {
            let mut cloud = HttpCloudSink::new(UreqTransport::default(), config);
            let stats = run_pipeline(
                events,
                &thresholds,
                Sinks {
                    local: &mut local,
                    cloud: &mut cloud,
                    alerts: &mut alerts,
                },
                &params,
            );
            (stats, Some(cloud.deliveries))
        }
        None => {
            let mut cloud = WriterSink(create(&out.file("cloud.csv"))?);
            let stats = run_pipeline(
                events,
                &thresholds,
                Sinks {
                    local: &mut local,
                    cloud: &mut cloud as &mut dyn RecordSink,
                    alerts: &mut alerts,
                },
                &params,
            );
            cloud.0.flush()?;
            (stats, None)
        }
    };
    local.0.flush()?;
    alerts.0.flush()?;
    let stats = stats?;
    println!(
        "events {}, stored {}, forwarded {}, alerts {}, reduction {:.4}",
        stats.events_seen, stats.local_rows, stats.cloud_rows, stats.alert_count, stats.reduction_ratio
    );

    let mut echo = base_echo(&loaded, None, policy);
    echo.thresholds = thresholds_path;
    echo.derive = Some(derive);
    echo.endpoint = endpoint_path;
    echo.offline = Some(offline);
    echo.interval = Some(params.sampling_interval_seconds);
    echo.sink_retries = Some(params.sink_retries);
    let report = envelope(
        "simulate",
        Some(loaded.sha256.clone()),
        None,
        json!({
            "params": params,
            "thresholds": thresholds,
            "stats": stats,
            "deliveries": deliveries,
        }),
    )?;
    out.write_report("simulate", &report)?;
    out.write_config("simulate", &echo)?;
    Ok(())
}
