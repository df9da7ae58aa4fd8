use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::pipeline::RecordSink;
use crate::dataset::{timestamp_to_epoch, Pir, SensorRecord, TimeReference};

pub const MAX_FIELDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldSource {
    Temp,
    #[serde(rename = "LDR")]
    Ldr,
    Gas,
    Hum,
    /// 1 for motion, 0 otherwise.
    #[serde(rename = "PIR")]
    Pir,
    /// Seconds since the Unix epoch, UTC.
    Epoch,
}

impl FieldSource {
    fn value(self, r: &SensorRecord) -> f64 {
        match self {
            FieldSource::Temp => r.temp_c,
            FieldSource::Ldr => r.ldr_lux,
            FieldSource::Gas => r.gas_ppm,
            FieldSource::Hum => r.hum_pct,
            FieldSource::Pir => match r.pir {
                Pir::Yes => 1.0,
                Pir::No => 0.0,
            },
            FieldSource::Epoch => timestamp_to_epoch(&r.timestamp, TimeReference::UTC).unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloudField {
    pub name: String,
    pub source: FieldSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    /// Sent first as `api_key` when present.
    #[serde(default)]
    pub api_key: Option<String>,
    pub fields: Vec<CloudField>,
    /// Form key carrying the person label.
    #[serde(default = "default_status_field")]
    pub status_field: String,
    /// Extra attempts after the first failure.
    #[serde(default)]
    pub retries: u32,
    #[serde(default)]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_status_field() -> String {
    "status".into()
}

fn default_timeout_ms() -> u64 {
    5000
}

impl EndpointConfig {
    /// ThingSpeak-style layout: field1..field5 carry Temp, LDR, Gas, Hum, PIR.
    pub fn thingspeak(url: impl Into<String>) -> Self {
        let sources = [FieldSource::Temp, FieldSource::Ldr, FieldSource::Gas, FieldSource::Hum, FieldSource::Pir];
        EndpointConfig {
            url: url.into(),
            api_key: None,
            fields: sources
                .iter()
                .enumerate()
                .map(|(i, &source)| CloudField {
                    name: format!("field{}", i + 1),
                    source,
                })
                .collect(),
            status_field: default_status_field(),
            retries: 0,
            backoff_ms: 0,
            timeout_ms: default_timeout_ms(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.fields.is_empty() || self.fields.len() > MAX_FIELDS {
            return Err(format!("between 1 and {MAX_FIELDS} fields required, got {}", self.fields.len()));
        }
        let mut seen = std::collections::HashSet::new();
        for f in &self.fields {
            if f.name.is_empty() || f.name == self.status_field || !seen.insert(&f.name) {
                return Err(format!("field name `{}` is empty or repeated", f.name));
            }
        }
        if !self.url.starts_with("http://") && !self.url.starts_with("https://") {
            return Err(format!("unsupported endpoint url `{}`", self.url));
        }
        Ok(())
    }

    /// Form-encoded body with keys in configuration order, status last.
    pub fn body(&self, record: &SensorRecord, status: &str) -> String {
        let mut form = form_urlencoded::Serializer::new(String::new());
        if let Some(key) = &self.api_key {
            form.append_pair("api_key", key);
        }
        for f in &self.fields {
            form.append_pair(&f.name, &f.source.value(record).to_string());
        }
        form.append_pair(&self.status_field, status);
        form.finish()
    }
}

/// Outcome of one POST: an HTTP status, or a transport failure message.
pub trait HttpTransport {
    fn post(&self, url: &str, body: &str, timeout: Duration) -> Result<u16, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl Default for UreqTransport {
    fn default() -> Self {
        UreqTransport {
            agent: ureq::AgentBuilder::new().build(),
        }
    }
}

impl HttpTransport for UreqTransport {
    fn post(&self, url: &str, body: &str, timeout: Duration) -> Result<u16, String> {
        let response = self
            .agent
            .post(url)
            .timeout(timeout)
            .set("Content-Type", "application/x-www-form-urlencoded")
            .send_string(body);
        match response {
            Ok(r) => Ok(r.status()),
            Err(ureq::Error::Status(code, _)) => Ok(code),
            Err(e) => Err(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryResult {
    pub attempts: u32,
    pub status: u16,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("delivery failed after {attempts} attempts: {message}")]
pub struct DeliveryError {
    pub attempts: u32,
    pub last_status: Option<u16>,
    pub message: String,
}

/// Posts one row, retrying non-2xx responses and transport errors with a
/// fixed backoff.
pub fn push_row(
    transport: &dyn HttpTransport,
    config: &EndpointConfig,
    record: &SensorRecord,
    status: &str,
) -> Result<DeliveryResult, DeliveryError> {
    let body = config.body(record, status);
    let timeout = Duration::from_millis(config.timeout_ms);
    let mut attempts = 0;
    loop {
        attempts += 1;
        let (last_status, message) = match transport.post(&config.url, &body, timeout) {
            Ok(code) if (200..300).contains(&code) => return Ok(DeliveryResult { attempts, status: code }),
            Ok(code) => (Some(code), format!("HTTP status {code}")),
            Err(e) => (None, e),
        };
        if attempts > config.retries {
            return Err(DeliveryError {
                attempts,
                last_status,
                message,
            });
        }
        log::debug!("cloud push attempt {attempts} failed: {message}");
        if config.backoff_ms > 0 {
            std::thread::sleep(Duration::from_millis(config.backoff_ms));
        }
    }
}

/// Pushes every row to an HTTP endpoint, keeping the delivery log.
pub struct HttpCloudSink<T: HttpTransport> {
    pub transport: T,
    pub config: EndpointConfig,
    pub deliveries: Vec<DeliveryResult>,
}

impl<T: HttpTransport> HttpCloudSink<T> {
    pub fn new(transport: T, config: EndpointConfig) -> Self {
        HttpCloudSink {
            transport,
            config,
            deliveries: Vec::new(),
        }
    }
}

impl<T: HttpTransport> RecordSink for HttpCloudSink<T> {
    fn write_header(&mut self, _: &str) -> Result<(), String> {
        Ok(())
    }

    fn write_row(&mut self, record: &SensorRecord, _: &str) -> Result<(), String> {
        let result = push_row(&self.transport, &self.config, record, &record.person).map_err(|e| e.to_string())?;
        self.deliveries.push(result);
        Ok(())
    }
}
