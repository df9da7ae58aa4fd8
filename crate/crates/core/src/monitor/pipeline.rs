use serde::{Deserialize, Serialize};

use super::{check_record, AlertEvent, ThresholdConfig};
use crate::dataset::{format_record, format_timestamp, header_line, SensorRecord};

/// Person label written locally when the camera saw no one.
pub const NO_PERSON: &str = "No person";

#[derive(Debug, Clone, PartialEq)]
pub struct StreamEvent {
    pub record: SensorRecord,
    /// Recognized person, if any.
    pub detection: Option<String>,
}

impl StreamEvent {
    /// Reads a stored row back as an event; the `No person` label means no
    /// detection.
    pub fn from_record(record: SensorRecord) -> Self {
        let detection = (record.person != NO_PERSON).then(|| record.person.clone());
        StreamEvent { record, detection }
    }
}

/// Destination for accepted rows.
pub trait RecordSink {
    fn write_header(&mut self, line: &str) -> std::result::Result<(), String>;
    /// `line` is `record` serialized in the dataset file format.
    fn write_row(&mut self, record: &SensorRecord, line: &str) -> std::result::Result<(), String>;
}

pub trait AlertSink {
    fn write_alert(&mut self, alert: &AlertEvent) -> std::result::Result<(), String>;
}

/// Collects everything in memory.
impl RecordSink for Vec<String> {
    fn write_header(&mut self, line: &str) -> std::result::Result<(), String> {
        self.push(line.to_string());
        Ok(())
    }

    fn write_row(&mut self, _: &SensorRecord, line: &str) -> std::result::Result<(), String> {
        self.push(line.to_string());
        Ok(())
    }
}

impl AlertSink for Vec<AlertEvent> {
    fn write_alert(&mut self, alert: &AlertEvent) -> std::result::Result<(), String> {
        self.push(alert.clone());
        Ok(())
    }
}

/// Any writer works as a row sink (CSV) or alert sink (one JSON object per line).
pub struct WriterSink<W>(pub W);

impl<W: std::io::Write> RecordSink for WriterSink<W> {
    fn write_header(&mut self, line: &str) -> std::result::Result<(), String> {
        self.0.write_all(line.as_bytes()).map_err(|e| e.to_string())
    }

    fn write_row(&mut self, _: &SensorRecord, line: &str) -> std::result::Result<(), String> {
        self.0.write_all(line.as_bytes()).map_err(|e| e.to_string())
    }
}

impl<W: std::io::Write> AlertSink for WriterSink<W> {
    fn write_alert(&mut self, alert: &AlertEvent) -> std::result::Result<(), String> {
        let mut line = serde_json::to_string(alert).map_err(|e| e.to_string())?;
        line.push('\n');
        self.0.write_all(line.as_bytes()).map_err(|e| e.to_string())
    }
}

pub struct Sinks<'a> {
    pub local: &'a mut dyn RecordSink,
    pub cloud: &'a mut dyn RecordSink,
    pub alerts: &'a mut dyn AlertSink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    /// Minimum spacing between accepted events, in seconds.
    pub sampling_interval_seconds: f64,
    /// Extra attempts per failed sink write.
    pub sink_retries: u32,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            sampling_interval_seconds: 4.0,
            sink_retries: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub events_seen: usize,
    pub skipped: usize,
    pub local_rows: usize,
    pub cloud_rows: usize,
    /// Serialized bytes written, header included.
    pub bytes_local: usize,
    pub bytes_cloud: usize,
    pub reduction_ratio: f64,
    pub alert_count: usize,
}

impl PipelineStats {
    fn finish(mut self) -> Self {
        self.reduction_ratio = if self.local_rows == 0 {
            0.0
        } else {
            (self.local_rows - self.cloud_rows) as f64 / self.local_rows as f64
        };
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("sampling interval must be positive, got {0}")]
    Interval(f64),
    #[error("event at {current} precedes previous event at {previous}")]
    OutOfOrder {
        previous: String,
        current: String,
        stats: PipelineStats,
    },
    #[error("{sink} sink failed after {attempts} attempts: {message}")]
    Sink {
        sink: &'static str,
        attempts: u32,
        message: String,
        stats: PipelineStats,
    },
}

impl PipelineError {
    /// Counts up to the failure.
    pub fn stats(&self) -> Option<&PipelineStats> {
        match self {
            PipelineError::Interval(_) => None,
            PipelineError::OutOfOrder { stats, .. } | PipelineError::Sink { stats, .. } => Some(stats),
        }
    }
}

fn with_retries(
    sink: &'static str,
    retries: u32,
    stats: &PipelineStats,
    mut write: impl FnMut() -> std::result::Result<(), String>,
) -> Result<(), PipelineError> {
    let mut attempts = 0;
    loop {
        attempts += 1;
        match write() {
            Ok(()) => return Ok(()),
            Err(message) if attempts > retries => {
                return Err(PipelineError::Sink {
                    sink,
                    attempts,
                    message,
                    stats: stats.clone().finish(),
                })
            }
            Err(e) => log::warn!("{sink} sink write failed (attempt {attempts}): {e}"),
        }
    }
}

/// Replays `events` through the sampling gate, storing every accepted
/// event locally, forwarding detections to the cloud sink and raising
/// threshold alerts.
pub fn run_pipeline(
    events: impl IntoIterator<Item = StreamEvent>,
    thresholds: &ThresholdConfig,
    sinks: Sinks<'_>,
    params: &PipelineParams,
) -> Result<PipelineStats, PipelineError> {
    let interval = params.sampling_interval_seconds;
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(PipelineError::Interval(interval));
    }
    let interval_micros = (interval * 1e6).round() as i64;
    let retries = params.sink_retries;
    let mut stats = PipelineStats::default();
    let header = header_line();
    with_retries("local", retries, &stats, || sinks.local.write_header(&header))?;
    with_retries("cloud", retries, &stats, || sinks.cloud.write_header(&header))?;
    stats.bytes_local = header.len();
    stats.bytes_cloud = header.len();

    let mut previous: Option<chrono::NaiveDateTime> = None;
    let mut last_accepted: Option<chrono::NaiveDateTime> = None;
    for event in events {
        let ts = event.record.timestamp;
        if let Some(prev) = previous {
            if ts < prev {
                return Err(PipelineError::OutOfOrder {
                    previous: format_timestamp(&prev),
                    current: format_timestamp(&ts),
                    stats: stats.finish(),
                });
            }
        }
        previous = Some(ts);
        stats.events_seen += 1;
        if let Some(last) = last_accepted {
            let gap = (ts - last).num_microseconds().unwrap_or(i64::MAX);
            if gap < interval_micros {
                stats.skipped += 1;
                continue;
            }
        }
        last_accepted = Some(ts);

        let mut row = event.record.clone();
        row.person = event.detection.clone().unwrap_or_else(|| NO_PERSON.to_string());
        let line = format_record(&row);
        with_retries("local", retries, &stats, || sinks.local.write_row(&row, &line))?;
        stats.local_rows += 1;
        stats.bytes_local += line.len();
        if event.detection.is_some() {
            with_retries("cloud", retries, &stats, || sinks.cloud.write_row(&row, &line))?;
            stats.cloud_rows += 1;
            stats.bytes_cloud += line.len();
        }
        for alert in check_record(&event.record, thresholds) {
            with_retries("alert", retries, &stats, || sinks.alerts.write_alert(&alert))?;
            stats.alert_count += 1;
        }
    }
    Ok(stats.finish())
}
