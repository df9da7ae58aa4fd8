//! Box-whisker thresholds, per-record alerting and the edge-filtered
//! ingestion pipeline.

pub mod cloud;
pub mod pipeline;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{format_timestamp, SensorRecord};

pub use cloud::{push_row, CloudField, DeliveryError, DeliveryResult, EndpointConfig, FieldSource, HttpCloudSink, HttpTransport, UreqTransport};
pub use pipeline::{run_pipeline, AlertSink, PipelineError, PipelineParams, PipelineStats, RecordSink, Sinks, StreamEvent, WriterSink};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MonitorError {
    #[error("five-number summary of an empty sample")]
    Empty,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("invalid bound for {sensor}: low {low} > high {high}")]
    Bound { sensor: Sensor, low: f64, high: f64 },
    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),
}

/// Numeric sensors in the fixed alert order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sensor {
    Temp,
    #[serde(rename = "LDR")]
    Ldr,
    Gas,
    Hum,
}

impl Sensor {
    pub const ORDER: [Sensor; 4] = [Sensor::Temp, Sensor::Ldr, Sensor::Gas, Sensor::Hum];

    pub fn name(self) -> &'static str {
        match self {
            Sensor::Temp => "Temp",
            Sensor::Ldr => "LDR",
            Sensor::Gas => "Gas",
            Sensor::Hum => "Hum",
        }
    }

    pub fn value(self, r: &SensorRecord) -> f64 {
        match self {
            Sensor::Temp => r.temp_c,
            Sensor::Ldr => r.ldr_lux,
            Sensor::Gas => r.gas_ppm,
            Sensor::Hum => r.hum_pct,
        }
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sensor {
    type Err = MonitorError;

    fn from_str(s: &str) -> Result<Self, MonitorError> {
        Sensor::ORDER
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| MonitorError::UnknownSensor(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub fence_low: f64,
    pub fence_high: f64,
}

/// Quartiles interpolate linearly between order statistics at `(n-1)q`;
/// fences sit 1.5 IQR beyond the outer quartiles.
pub fn five_number_summary(values: &[f64]) -> Result<FiveNumberSummary, MonitorError> {
    if values.is_empty() {
        return Err(MonitorError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MonitorError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |q: f64| {
        let pos = (sorted.len() - 1) as f64 * q;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    let (q1, q2, q3) = (quantile(0.25), quantile(0.5), quantile(0.75));
    let iqr = q3 - q1;
    Ok(FiveNumberSummary {
        min: sorted[0],
        q1,
        q2,
        q3,
        max: sorted[sorted.len() - 1],
        iqr,
        fence_low: q1 - 1.5 * iqr,
        fence_high: q3 + 1.5 * iqr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Manual,
    DerivedFromFences,
}

/// Inclusive `[low, high]` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub low: f64,
    pub high: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdConfig {
    bounds: BTreeMap<Sensor, Bound>,
}

impl ThresholdConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, sensor: Sensor) -> Option<&Bound> {
        self.bounds.get(&sensor)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Sensor, &Bound)> {
        self.bounds.iter().map(|(s, b)| (*s, b))
    }

    pub fn set_manual(&mut self, sensor: Sensor, low: f64, high: f64) -> Result<(), MonitorError> {
        self.insert(sensor, low, high, Provenance::Manual)
    }

    fn insert(&mut self, sensor: Sensor, low: f64, high: f64, provenance: Provenance) -> Result<(), MonitorError> {
        if !(low <= high) {
            return Err(MonitorError::Bound { sensor, low, high });
        }
        self.bounds.insert(sensor, Bound { low, high, provenance });
        Ok(())
    }

    /// Checks `low <= high` everywhere; needed after deserializing.
    pub fn validate(&self) -> Result<(), MonitorError> {
        for (&sensor, b) in &self.bounds {
            if !(b.low <= b.high) {
                return Err(MonitorError::Bound {
                    sensor,
                    low: b.low,
                    high: b.high,
                });
            }
        }
        Ok(())
    }
}

pub fn derive_thresholds(summaries: &[(Sensor, FiveNumberSummary)]) -> ThresholdConfig {
    let mut config = ThresholdConfig::new();
    for &(sensor, s) in summaries {
        config.bounds.insert(
            sensor,
            Bound {
                low: s.fence_low,
                high: s.fence_high,
                provenance: Provenance::DerivedFromFences,
            },
        );
    }
    config
}

/// Summaries of every numeric sensor over `records`, in alert order.
pub fn summarize_records(records: &[SensorRecord]) -> Result<Vec<(Sensor, FiveNumberSummary)>, MonitorError> {
    Sensor::ORDER
        .into_iter()
        .map(|s| {
            let values: Vec<f64> = records.iter().map(|r| s.value(r)).collect();
            Ok((s, five_number_summary(&values)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub timestamp: String,
    pub sensor: Sensor,
    pub value: f64,
    pub side: BoundSide,
    pub bound: f64,
    pub message: String,
}

/// One alert per sensor whose value lies strictly outside its bounds.
pub fn check_record(record: &SensorRecord, config: &ThresholdConfig) -> Vec<AlertEvent> {
    let mut alerts = Vec::new();
    for sensor in Sensor::ORDER {
        let Some(bound) = config.get(sensor) else { continue };
        let value = sensor.value(record);
        let (side, limit) = if value < bound.low {
            (BoundSide::Low, bound.low)
        } else if value > bound.high {
            (BoundSide::High, bound.high)
        } else {
            continue;
        };
        let timestamp = format_timestamp(&record.timestamp);
        let relation = match side {
            BoundSide::Low => "below low",
            BoundSide::High => "above high",
        };
        alerts.push(AlertEvent {
            message: format!("{sensor} reading {value} is {relation} bound {limit} at {timestamp}"),
            timestamp,
            sensor,
            value,
            side,
            bound: limit,
        });
    }
    alerts
}
