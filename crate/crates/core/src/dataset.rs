//! Sensor-record ingestion and preprocessing.
//!
//! Records arrive as comma-separated text with the fixed header
//! `Person,Temp,LDR,Gas,PIR,Hum,Timestamp`. This module parses them,
//! handles gaps, one-hot encodes PIR, factorizes person labels, converts
//! timestamps to epoch seconds and assembles model-ready [`Dataset`]s.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

/// Column names of the input file, in order.
pub const HEADER: [&str; 7] = ["Person", "Temp", "LDR", "Gas", "PIR", "Hum", "Timestamp"];

/// Feature columns produced by [`build_feature_dataset`], in order.
pub const FEATURE_NAMES: [&str; 6] = ["Temp", "LDR", "Gas", "Hum", "PIR_No", "PIR_Yes"];

/// Canonical timestamp layout used for both parsing and printing.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S%.6f";

const TIMESTAMP_PARSE_FORMAT: &str = "%Y-%m-%d %H:%M:%S%.f";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("header mismatch in column {index}: expected `{expected}`, found `{found}`")]
    Schema {
        index: usize,
        expected: &'static str,
        found: String,
    },
    #[error("row {row}, column {column}: {message}")]
    Field {
        row: usize,
        column: &'static str,
        message: String,
    },
    #[error("column {0} has no non-missing values to impute from")]
    AllMissing(&'static str),
    #[error("timestamp {0} precedes the 1970 epoch")]
    PreEpoch(String),
    #[error("empty input")]
    Empty,
    #[error("shape mismatch: expected {expected} columns, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("invalid scaling range [{0}, {1}]: new_max must exceed new_min")]
    InvalidRange(f64, f64),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid timestamp `{0}`")]
    Timestamp(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// Passive-infrared motion reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pir {
    No,
    Yes,
}

impl FromStr for Pir {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "Yes" => Ok(Pir::Yes),
            "No" => Ok(Pir::No),
            other => Err(format!("expected `Yes` or `No`, found `{other}`")),
        }
    }
}

impl fmt::Display for Pir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pir::Yes => "Yes",
            Pir::No => "No",
        })
    }
}

/// One timestamped observation from the monitoring unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecord {
    pub person: String,
    pub temp_c: f64,
    pub ldr_lux: f64,
    pub gas_ppm: f64,
    pub pir: Pir,
    pub hum_pct: f64,
    pub timestamp: NaiveDateTime,
}

/// A record that may carry gaps, as read by [`parse_partial_records`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialRecord {
    pub person: Option<String>,
    pub temp_c: Option<f64>,
    pub ldr_lux: Option<f64>,
    pub gas_ppm: Option<f64>,
    pub pir: Option<Pir>,
    pub hum_pct: Option<f64>,
    pub timestamp: Option<NaiveDateTime>,
}

impl PartialRecord {
    pub fn is_complete(&self) -> bool {
        self.person.is_some()
            && self.temp_c.is_some()
            && self.ldr_lux.is_some()
            && self.gas_ppm.is_some()
            && self.pir.is_some()
            && self.hum_pct.is_some()
            && self.timestamp.is_some()
    }

    fn into_record(self) -> Option<SensorRecord> {
        Some(SensorRecord {
            person: self.person?,
            temp_c: self.temp_c?,
            ldr_lux: self.ldr_lux?,
            gas_ppm: self.gas_ppm?,
            pir: self.pir?,
            hum_pct: self.hum_pct?,
            timestamp: self.timestamp?,
        })
    }
}

impl From<SensorRecord> for PartialRecord {
    fn from(r: SensorRecord) -> Self {
        PartialRecord {
            person: Some(r.person),
            temp_c: Some(r.temp_c),
            ldr_lux: Some(r.ldr_lux),
            gas_ppm: Some(r.gas_ppm),
            pir: Some(r.pir),
            hum_pct: Some(r.hum_pct),
            timestamp: Some(r.timestamp),
        }
    }
}

pub fn parse_timestamp(text: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(text, TIMESTAMP_PARSE_FORMAT)
        .map_err(|_| DatasetError::Timestamp(text.to_string()))
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

fn check_header(fields: &csv::StringRecord) -> Result<()> {
    for (index, expected) in HEADER.iter().enumerate() {
        let found = fields.get(index).unwrap_or("");
        if found != *expected {
            return Err(DatasetError::Schema {
                index,
                expected,
                found: found.to_string(),
            });
        }
    }
    if fields.len() > HEADER.len() {
        return Err(DatasetError::Schema {
            index: HEADER.len(),
            expected: "<end of header>",
            found: fields[HEADER.len()].to_string(),
        });
    }
    Ok(())
}

fn parse_real(
    row: usize,
    column: &'static str,
    text: &str,
    check: fn(f64) -> bool,
    range: &str,
) -> Result<Option<f64>> {
    if text.is_empty() {
        return Ok(None);
    }
    let value: f64 = text.parse().map_err(|_| DatasetError::Field {
        row,
        column,
        message: format!("`{text}` is not a number"),
    })?;
    if !value.is_finite() || !check(value) {
        return Err(DatasetError::Field {
            row,
            column,
            message: format!("value {value} outside {range}"),
        });
    }
    Ok(Some(value))
}

fn parse_row(row: usize, fields: &csv::StringRecord) -> Result<PartialRecord> {
    if fields.len() != HEADER.len() {
        return Err(DatasetError::Field {
            row,
            column: HEADER[fields.len().min(HEADER.len() - 1)],
            message: format!("expected {} fields, found {}", HEADER.len(), fields.len()),
        });
    }
    let person = (!fields[0].is_empty()).then(|| fields[0].to_string());
    let temp_c = parse_real(row, "Temp", &fields[1], |_| true, "the real line")?;
    let ldr_lux = parse_real(row, "LDR", &fields[2], |v| v >= 0.0, "[0, inf)")?;
    let gas_ppm = parse_real(row, "Gas", &fields[3], |v| v >= 0.0, "[0, inf)")?;
    let pir = match &fields[4] {
        "" => None,
        text => Some(text.parse::<Pir>().map_err(|message| DatasetError::Field {
            row,
            column: "PIR",
            message,
        })?),
    };
    let hum_pct = parse_real(row, "Hum", &fields[5], |v| (0.0..=100.0).contains(&v), "[0, 100]")?;
    let timestamp = match &fields[6] {
        "" => None,
        text => Some(parse_timestamp(text).map_err(|_| DatasetError::Field {
            row,
            column: "Timestamp",
            message: format!("`{text}` does not match YYYY-MM-DD HH:MM:SS.ffffff"),
        })?),
    };
    Ok(PartialRecord {
        person,
        temp_c,
        ldr_lux,
        gas_ppm,
        pir,
        hum_pct,
        timestamp,
    })
}

/// Parses records that may contain empty fields. Row indices in errors are
/// 1-based and count data rows only (the header is not a row).
pub fn parse_partial_records<R: Read>(input: R) -> Result<Vec<PartialRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut rows = reader.records();
    match rows.next() {
        None => return Ok(Vec::new()),
        Some(header) => check_header(&header?)?,
    }
    let mut out = Vec::new();
    for (i, fields) in rows.enumerate() {
        let fields = fields?;
        // a bare trailing line is not a record
        if fields.len() == 1 && fields[0].is_empty() {
            continue;
        }
        out.push(parse_row(i + 1, &fields)?);
    }
    Ok(out)
}

/// Parses a complete file; any empty field is a row-level error.
pub fn parse_records<R: Read>(input: R) -> Result<Vec<SensorRecord>> {
    parse_partial_records(input)?
        .into_iter()
        .enumerate()
        .map(|(i, partial)| {
            let missing = first_missing(&partial);
            partial.into_record().ok_or_else(|| DatasetError::Field {
                row: i + 1,
                column: missing,
                message: "missing value".to_string(),
            })
        })
        .collect()
}

fn first_missing(p: &PartialRecord) -> &'static str {
    let present = [
        p.person.is_some(),
        p.temp_c.is_some(),
        p.ldr_lux.is_some(),
        p.gas_ppm.is_some(),
        p.pir.is_some(),
        p.hum_pct.is_some(),
        p.timestamp.is_some(),
    ];
    present
        .iter()
        .position(|ok| !ok)
        .map(|i| HEADER[i])
        .unwrap_or("")
}

fn format_real(v: f64) -> String {
    format!("{v}")
}

fn quote_field(text: &str) -> String {
    if text.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

pub fn header_line() -> String {
    let mut line = HEADER.join(",");
    line.push('\n');
    line
}

/// Serializes one record as a newline-terminated line of the input format.
pub fn format_record(r: &SensorRecord) -> String {
    format!(
        "{},{},{},{},{},{},{}\n",
        quote_field(&r.person),
        format_real(r.temp_c),
        format_real(r.ldr_lux),
        format_real(r.gas_ppm),
        r.pir,
        format_real(r.hum_pct),
        format_timestamp(&r.timestamp),
    )
}

pub fn write_records<W: Write>(mut out: W, records: &[SensorRecord]) -> Result<()> {
    out.write_all(header_line().as_bytes())?;
    for r in records {
        out.write_all(format_record(r).as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    DropRow,
    ImputeMean,
}

/// Resolves gaps. Records missing a categorical field (person, PIR,
/// timestamp) are always dropped.
pub fn handle_missing(
    records: Vec<PartialRecord>,
    policy: MissingPolicy,
) -> Result<Vec<SensorRecord>> {
    let total = records.len();
    let out: Vec<SensorRecord> = match policy {
        MissingPolicy::DropRow => records
            .into_iter()
            .filter_map(PartialRecord::into_record)
            .collect(),
        MissingPolicy::ImputeMean => {
            let categorical_ok: Vec<PartialRecord> = records
                .into_iter()
                .filter(|r| r.person.is_some() && r.pir.is_some() && r.timestamp.is_some())
                .collect();
            type Getter = fn(&mut PartialRecord) -> &mut Option<f64>;
            let columns: [(&'static str, Getter); 4] = [
                ("Temp", |r| &mut r.temp_c),
                ("LDR", |r| &mut r.ldr_lux),
                ("Gas", |r| &mut r.gas_ppm),
                ("Hum", |r| &mut r.hum_pct),
            ];
            let mut rows = categorical_ok;
            for (name, get) in columns {
                let (sum, count) = rows
                    .iter_mut()
                    .filter_map(|r| *get(r))
                    .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                if count == rows.len() {
                    continue;
                }
                if count == 0 {
                    return Err(DatasetError::AllMissing(name));
                }
                let mean = sum / count as f64;
                for r in rows.iter_mut() {
                    get(r).get_or_insert(mean);
                }
            }
            rows.into_iter()
                .filter_map(PartialRecord::into_record)
                .collect()
        }
    };
    if out.len() < total {
        log::info!("dropped {} of {} records with missing fields", total - out.len(), total);
    }
    Ok(out)
}

/// One-hot PIR columns `(pir_no, pir_yes)`.
pub fn encode_pir(records: &[SensorRecord]) -> (Vec<f64>, Vec<f64>) {
    records
        .iter()
        .map(|r| match r.pir {
            Pir::No => (1.0, 0.0),
            Pir::Yes => (0.0, 1.0),
        })
        .unzip()
}

/// Min-max scaler state fitted on a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub new_min: f64,
    pub new_max: f64,
}

pub fn fit_minmax(features: &Array2<f64>, new_range: (f64, f64)) -> Result<ScalerParams> {
    let (new_min, new_max) = new_range;
    if !(new_max > new_min) {
        return Err(DatasetError::InvalidRange(new_min, new_max));
    }
    if features.nrows() == 0 {
        return Err(DatasetError::Empty);
    }
    let (min, max) = features
        .axis_iter(Axis(1))
        .map(|col| {
            col.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
        })
        .unzip();
    Ok(ScalerParams {
        min,
        max,
        new_min,
        new_max,
    })
}

impl ScalerParams {
    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    fn check_shape(&self, features: &Array2<f64>) -> Result<()> {
        if features.ncols() != self.n_features() {
            return Err(DatasetError::Shape {
                expected: self.n_features(),
                found: features.ncols(),
            });
        }
        Ok(())
    }

    /// Applies `x' = (x - min)/(max - min)·(new_max - new_min) + new_min`.
    /// A constant training column maps everything to `new_min`; values
    /// outside the fitted range extrapolate.
    pub fn apply(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_shape(features)?;
        let span = self.new_max - self.new_min;
        let mut out = features.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            if hi > lo {
                col.mapv_inplace(|x| (x - lo) / (hi - lo) * span + self.new_min);
            } else {
                col.fill(self.new_min);
            }
        }
        Ok(out)
    }

    /// Algebraic inverse of [`ScalerParams::apply`] (constant columns map back to `min`).
    pub fn invert(&self, scaled: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_shape(scaled)?;
        let span = self.new_max - self.new_min;
        let mut out = scaled.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            col.mapv_inplace(|x| (x - self.new_min) / span * (hi - lo) + lo);
        }
        Ok(out)
    }
}

pub fn apply_minmax(params: &ScalerParams, features: &Array2<f64>) -> Result<Array2<f64>> {
    params.apply(features)
}

/// Label-string to integer-code mapping in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelEncoding {
    names: Vec<String>,
    codes: HashMap<String, usize>,
}

impl LabelEncoding {
    pub fn from_names(names: Vec<String>) -> Self {
        let codes = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        LabelEncoding { names, codes }
    }

    pub fn code(&self, name: &str) -> Option<usize> {
        self.codes.get(name).copied()
    }

    pub fn name(&self, code: usize) -> Option<&str> {
        self.names.get(code).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&code) = self.codes.get(name) {
            return code;
        }
        let code = self.names.len();
        self.names.push(name.to_string());
        self.codes.insert(name.to_string(), code);
        code
    }
}

pub fn factorize_labels<S: AsRef<str>>(labels: &[S]) -> (LabelEncoding, Vec<usize>) {
    let mut enc = LabelEncoding::default();
    let codes = labels.iter().map(|l| enc.intern(l.as_ref())).collect();
    (enc, codes)
}

/// Reference zone for interpreting naive timestamps, as a fixed offset east of UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TimeReference {
    pub utc_offset_seconds: i32,
}

impl TimeReference {
    pub const UTC: TimeReference = TimeReference {
        utc_offset_seconds: 0,
    };
}

/// Seconds since 1970-01-01T00:00:00 in the reference zone, fractional
/// microseconds included.
pub fn timestamp_to_epoch(ts: &NaiveDateTime, zone: TimeReference) -> Result<f64> {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid epoch");
    let micros = (*ts - epoch)
        .num_microseconds()
        .ok_or_else(|| DatasetError::Timestamp(format_timestamp(ts)))?
        - i64::from(zone.utc_offset_seconds) * 1_000_000;
    if micros < 0 {
        return Err(DatasetError::PreEpoch(format_timestamp(ts)));
    }
    // exact integer micros; one correctly-rounded division
    Ok(micros as f64 / 1e6)
}

/// Numeric feature matrix with integer-coded labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    feature_names: Vec<String>,
    labels: Vec<usize>,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        feature_names: Vec<String>,
        labels: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(DatasetError::Invalid(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.ncols() != feature_names.len() {
            return Err(DatasetError::Shape {
                expected: feature_names.len(),
                found: features.ncols(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= label_names.len()) {
            return Err(DatasetError::Invalid(format!(
                "label code {bad} outside [0, {})",
                label_names.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(DatasetError::Invalid(format!("duplicate feature name `{dup}`")));
        }
        Ok(Dataset {
            features,
            feature_names,
            labels,
            label_names,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }

    /// Subset of rows, keeping the full label registry.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            label_names: self.label_names.clone(),
        }
    }

    /// Same labels and names, replaced feature values.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        Dataset::new(
            features,
            self.feature_names.clone(),
            self.labels.clone(),
            self.label_names.clone(),
        )
    }
}

pub fn build_feature_dataset(records: &[SensorRecord]) -> Result<Dataset> {
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    let (pir_no, pir_yes) = encode_pir(records);
    let mut features = Array2::zeros((records.len(), FEATURE_NAMES.len()));
    for (i, r) in records.iter().enumerate() {
        let row = [r.temp_c, r.ldr_lux, r.gas_ppm, r.hum_pct, pir_no[i], pir_yes[i]];
        for (j, v) in row.into_iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    let persons: Vec<&str> = records.iter().map(|r| r.person.as_str()).collect();
    let (encoding, labels) = factorize_labels(&persons);
    Dataset::new(
        features,
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        labels,
        encoding.names().to_vec(),
    )
}

pub fn build_time_dataset(records: &[SensorRecord], zone: TimeReference) -> Result<Dataset> {
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    let seconds = records
        .iter()
        .map(|r| timestamp_to_epoch(&r.timestamp, zone))
        .collect::<Result<Vec<f64>>>()?;
    let persons: Vec<&str> = records.iter().map(|r| r.person.as_str()).collect();
    let (encoding, labels) = factorize_labels(&persons);
    let n = seconds.len();
    Dataset::new(
        Array2::from_shape_vec((n, 1), seconds).expect("n x 1"),
        vec!["Timestamp".to_string()],
        labels,
        encoding.names().to_vec(),
    )
}
