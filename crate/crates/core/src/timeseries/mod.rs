//! Multivariate time-series modelling: VAR(p) estimation and forecasting,
//! AIC order selection, ADF stationarity tests and pairwise Granger tests.

pub mod adf;
pub mod granger;
mod ols;
pub mod var;

use ndarray::{concatenate, s, Array2, Axis};
use serde::{Deserialize, Serialize};

pub use adf::{adf_test, schwert_max_lag, AdfResult, SignificanceLevel};
pub use granger::{granger_all_pairs, granger_test, GrangerResult};
pub use var::{fit_var, forecast, select_order, ForecastMode, ForecastResult, LagSelection, VarModel};

use crate::dataset::{timestamp_to_epoch, SensorRecord, TimeReference};

/// Series names taken from sensor records, in frame column order.
pub const SENSOR_SERIES: [&str; 4] = ["Temp", "Hum", "LDR", "Gas"];

#[derive(Debug, thiserror::Error)]
pub enum TimeSeriesError {
    #[error("invalid frame: {0}")]
    Frame(String),
    #[error("not enough observations: need at least {needed}, have {have}")]
    Insufficient { needed: usize, have: usize },
    #[error("design matrix is rank deficient: `{column}` is collinear with earlier columns")]
    RankDeficient { column: String },
    #[error("series `{0}` is constant")]
    ConstantSeries(String),
    #[error("unknown series `{0}`")]
    UnknownSeries(String),
    #[error("cause and effect must differ (both `{0}`)")]
    SameSeries(String),
    #[error("unrestricted model fits `{0}` perfectly; F statistic undefined")]
    DegenerateFit(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, TimeSeriesError>;

/// Time-ordered `T × m` observations with unique column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesFrame {
    values: Array2<f64>,
    names: Vec<String>,
    /// Nominal sampling interval in seconds, when known.
    pub interval_seconds: Option<f64>,
}

impl TimeSeriesFrame {
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if values.ncols() != names.len() {
            return Err(TimeSeriesError::Frame(format!(
                "{} columns but {} names",
                values.ncols(),
                names.len()
            )));
        }
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(TimeSeriesError::Frame("frame needs at least one row and one column".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TimeSeriesError::Frame("missing or non-finite value".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(TimeSeriesError::Frame(format!("duplicate series name `{dup}`")));
        }
        Ok(TimeSeriesFrame {
            values,
            names,
            interval_seconds: None,
        })
    }

    /// Temp, Hum, LDR and Gas columns in record order; the interval is the
    /// median spacing of the timestamps.
    pub fn from_records(records: &[SensorRecord]) -> Result<Self> {
        let values = Array2::from_shape_fn((records.len(), 4), |(i, j)| {
            let r = &records[i];
            [r.temp_c, r.hum_pct, r.ldr_lux, r.gas_ppm][j]
        });
        let mut frame = Self::new(values, SENSOR_SERIES.iter().map(|s| s.to_string()).collect())?;
        let mut gaps: Vec<f64> = records
            .windows(2)
            .filter_map(|w| {
                let a = timestamp_to_epoch(&w[0].timestamp, TimeReference::UTC).ok()?;
                let b = timestamp_to_epoch(&w[1].timestamp, TimeReference::UTC).ok()?;
                Some(b - a)
            })
            .collect();
        if !gaps.is_empty() {
            gaps.sort_by(f64::total_cmp);
            frame.interval_seconds = Some(gaps[gaps.len() / 2]);
        }
        Ok(frame)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.values.ncols()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| TimeSeriesError::UnknownSeries(name.to_string()))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).to_vec()
    }

    pub fn rows(&self, start: usize, end: usize) -> Result<TimeSeriesFrame> {
        let mut f = Self::new(self.values.slice(s![start..end, ..]).to_owned(), self.names.clone())?;
        f.interval_seconds = self.interval_seconds;
        Ok(f)
    }

    /// Appends `other`'s rows; names must agree.
    pub fn concat(&self, other: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
        if self.names != other.names {
            return Err(TimeSeriesError::Frame("series names differ".into()));
        }
        let values = concatenate(Axis(0), &[self.values.view(), other.values.view()])
            .map_err(|e| TimeSeriesError::Frame(e.to_string()))?;
        let mut f = Self::new(values, self.names.clone())?;
        f.interval_seconds = self.interval_seconds;
        Ok(f)
    }

    /// First differences, one row shorter.
    pub fn difference(&self) -> Result<TimeSeriesFrame> {
        if self.n_obs() < 2 {
            return Err(TimeSeriesError::Insufficient {
                needed: 2,
                have: self.n_obs(),
            });
        }
        let diff = &self.values.slice(s![1.., ..]) - &self.values.slice(s![..-1, ..]);
        let mut f = Self::new(diff, self.names.clone())?;
        f.interval_seconds = self.interval_seconds;
        Ok(f)
    }
}

/// Chronological split: the last `n_test` rows form the test frame.
pub fn chrono_split(frame: &TimeSeriesFrame, n_test: usize) -> Result<(TimeSeriesFrame, TimeSeriesFrame)> {
    let t = frame.n_obs();
    if n_test < 1 || n_test >= t {
        return Err(TimeSeriesError::Param(format!("n_test = {n_test} must lie in [1, {})", t)));
    }
    Ok((frame.rows(0, t - n_test)?, frame.rows(t - n_test, t)?))
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(TimeSeriesError::Length(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(TimeSeriesError::Param("rmse of empty vectors".into()));
    }
    let mse = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).powi(2))
        .sum::<f64>()
        / actual.len() as f64;
    Ok(mse.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn frame(t: usize) -> TimeSeriesFrame {
        let values = Array2::from_shape_fn((t, 2), |(i, j)| (i * 2 + j) as f64);
        TimeSeriesFrame::new(values, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355).abs() < 1e-4);
        let a = [1.0, -2.0, 5.5];
        let p: Vec<f64> = a.iter().map(|v| v + 0.75).collect();
        assert!((rmse(&a, &p).unwrap() - 0.75).abs() < 1e-12);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(TimeSeriesError::Length(1, 2))));
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn split_last_rows() {
        let f = frame(100);
        let (train, test) = chrono_split(&f, 5).unwrap();
        assert_eq!((train.n_obs(), test.n_obs()), (95, 5));
        assert_eq!(test.values().row(0).to_vec(), f.values().row(95).to_vec());
        assert_eq!(train.concat(&test).unwrap(), f);
        let (train, _) = chrono_split(&f, 99).unwrap();
        assert_eq!(train.n_obs(), 1);
        assert!(chrono_split(&f, 0).is_err());
        assert!(chrono_split(&f, 100).is_err());
    }

    #[test]
    fn frame_validation() {
        assert!(TimeSeriesFrame::new(array![[1.0, f64::NAN]], vec!["a".into(), "b".into()]).is_err());
        assert!(TimeSeriesFrame::new(array![[1.0, 2.0]], vec!["a".into(), "a".into()]).is_err());
        assert!(TimeSeriesFrame::new(Array2::zeros((0, 1)), vec!["a".into()]).is_err());
    }

    #[test]
    fn differencing() {
        let d = frame(4).difference().unwrap();
        assert_eq!(d.n_obs(), 3);
        assert!(d.values().iter().all(|&v| v == 2.0));
    }
}
