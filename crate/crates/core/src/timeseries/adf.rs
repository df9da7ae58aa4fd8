use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ols::{qr_fit, xtx_inverse_diagonal};
use super::{Result, TimeSeriesError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SignificanceLevel {
    #[serde(rename = "1%")]
    OnePercent,
    #[default]
    #[serde(rename = "5%")]
    FivePercent,
    #[serde(rename = "10%")]
    TenPercent,
}

impl SignificanceLevel {
    pub const ALL: [SignificanceLevel; 3] = [Self::OnePercent, Self::FivePercent, Self::TenPercent];

    /// Asymptotic critical value for the constant-only regression.
    pub fn critical_value(self) -> f64 {
        match self {
            Self::OnePercent => -3.43,
            Self::FivePercent => -2.86,
            Self::TenPercent => -2.57,
        }
    }
}

impl std::str::FromStr for SignificanceLevel {
    type Err = TimeSeriesError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_end_matches('%') {
            "1" | "0.01" => Ok(Self::OnePercent),
            "5" | "0.05" => Ok(Self::FivePercent),
            "10" | "0.1" | "0.10" => Ok(Self::TenPercent),
            _ => Err(TimeSeriesError::Param(format!("unsupported significance level `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    #[serde(rename = "1%")]
    pub one: f64,
    #[serde(rename = "5%")]
    pub five: f64,
    #[serde(rename = "10%")]
    pub ten: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    /// t-ratio of the lagged level; NaN when the regression is degenerate
    /// (only possible for a trending series, see `trend_warning`).
    pub statistic: f64,
    pub lags: usize,
    pub regression: String,
    pub n_obs: usize,
    pub critical_values: CriticalValues,
    pub level: SignificanceLevel,
    pub stationary: bool,
    /// A straight line explains most of the series; the constant-only
    /// regression does not model a deterministic trend.
    pub trend_warning: bool,
}

impl AdfResult {
    pub fn rejects_at(&self, level: SignificanceLevel) -> bool {
        self.statistic < level.critical_value()
    }
}

const TREND_R2: f64 = 0.95;

pub fn schwert_max_lag(t: usize) -> usize {
    (12.0 * (t as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Augmented Dickey-Fuller test with a constant: regresses `Δy_t` on
/// `[1, y_{t-1}, Δy_{t-1} .. Δy_{t-L}]`.
pub fn adf_test(series: &[f64], max_lag: Option<usize>, level: SignificanceLevel) -> Result<AdfResult> {
    let t = series.len();
    let lags = max_lag.unwrap_or_else(|| schwert_max_lag(t));
    if t <= lags + 10 {
        return Err(TimeSeriesError::Insufficient {
            needed: lags + 11,
            have: t,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(TimeSeriesError::Param("series contains non-finite values".into()));
    }
    if series.iter().all(|&v| v == series[0]) {
        return Err(TimeSeriesError::ConstantSeries("series".into()));
    }
    let trend_warning = trend_r2(series) >= TREND_R2;

    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    // dy[i] = y[i+1] - y[i]; targets are dy[lags..]
    let n = dy.len() - lags;
    let x = DMatrix::from_fn(n, 2 + lags, |r, c| {
        let i = lags + r;
        match c {
            0 => 1.0,
            1 => series[i],
            _ => dy[i - (c - 1)],
        }
    });
    let target = DMatrix::from_fn(n, 1, |r, _| dy[lags + r]);
    let critical_values = CriticalValues {
        one: SignificanceLevel::OnePercent.critical_value(),
        five: SignificanceLevel::FivePercent.critical_value(),
        ten: SignificanceLevel::TenPercent.critical_value(),
    };
    let degenerate = |err: TimeSeriesError| {
        if trend_warning {
            Ok(AdfResult {
                statistic: f64::NAN,
                lags,
                regression: "constant".into(),
                n_obs: n,
                critical_values,
                level,
                stationary: false,
                trend_warning,
            })
        } else {
            Err(err)
        }
    };

    let fit = match qr_fit(&x, &target, |c| match c {
        0 => "constant".into(),
        1 => "lagged level".into(),
        c => format!("difference lag {}", c - 1),
    }) {
        Ok(f) => f,
        Err(e) => return degenerate(e),
    };
    let dof = n as f64 - (2 + lags) as f64;
    let s2 = fit.residuals.norm_squared() / dof;
    if !(s2 > 0.0) {
        return degenerate(TimeSeriesError::DegenerateFit("differenced series".into()));
    }
    let se = (s2 * xtx_inverse_diagonal(&fit.r)?[1]).sqrt();
    let statistic = fit.coef[(1, 0)] / se;
    Ok(AdfResult {
        statistic,
        lags,
        regression: "constant".into(),
        n_obs: n,
        critical_values,
        level,
        stationary: statistic < level.critical_value(),
        trend_warning,
    })
}

// R² of y on [1, t]
fn trend_r2(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let y_mean = y.iter().sum::<f64>() / n;
    let (mut sty, mut stt, mut syy) = (0.0, 0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        let dt = i as f64 - t_mean;
        let dv = v - y_mean;
        sty += dt * dv;
        stt += dt * dt;
        syy += dv * dv;
    }
    if syy == 0.0 {
        return 0.0;
    }
    sty * sty / (stt * syy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ar1(phi: f64, t: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = Vec::with_capacity(t);
        let mut prev = 0.0;
        for _ in 0..t + 100 {
            let e: f64 = StandardNormal.sample(&mut rng);
            prev = phi * prev + e;
            y.push(prev);
        }
        y.split_off(100)
    }

    #[test]
    fn stationary_ar_detected() {
        let hits = (0..20)
            .filter(|&s| adf_test(&ar1(0.5, 500, s), None, SignificanceLevel::FivePercent).unwrap().stationary)
            .count();
        assert!(hits >= 18, "{hits}/20");
    }

    #[test]
    fn random_walk_not_stationary() {
        let hits = (0..20)
            .filter(|&s| !adf_test(&ar1(1.0, 500, 1000 + s), None, SignificanceLevel::FivePercent).unwrap().stationary)
            .count();
        assert!(hits >= 18, "{hits}/20");
    }

    #[test]
    fn statistic_matches_normal_equations() {
        let y = ar1(0.3, 120, 9);
        let r = adf_test(&y, Some(2), SignificanceLevel::FivePercent).unwrap();
        // independent oracle: explicit (X'X)^{-1} X'y
        let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
        let rows: Vec<[f64; 4]> = (2..dy.len()).map(|i| [1.0, y[i], dy[i - 1], dy[i - 2]]).collect();
        let x = DMatrix::from_fn(rows.len(), 4, |r, c| rows[r][c]);
        let target = DMatrix::from_fn(rows.len(), 1, |r, _| dy[r + 2]);
        let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
        let beta = &xtx_inv * x.transpose() * &target;
        let resid = &target - &x * &beta;
        let s2 = resid.norm_squared() / (rows.len() - 4) as f64;
        let expected = beta[(1, 0)] / (s2 * xtx_inv[(1, 1)]).sqrt();
        assert!((r.statistic - expected).abs() < 1e-8, "{} vs {expected}", r.statistic);
        assert_eq!(r.n_obs, rows.len());
        assert_eq!(r.lags, 2);
    }

    #[test]
    fn decision_monotone_in_level() {
        for seed in 0..10 {
            let y = ar1(0.9, 200, seed);
            let r = adf_test(&y, Some(3), SignificanceLevel::OnePercent).unwrap();
            if r.rejects_at(SignificanceLevel::OnePercent) {
                assert!(r.rejects_at(SignificanceLevel::FivePercent));
            }
            if r.rejects_at(SignificanceLevel::FivePercent) {
                assert!(r.rejects_at(SignificanceLevel::TenPercent));
            }
            assert_eq!(r.stationary, r.statistic < -3.43);
        }
    }

    #[test]
    fn schwert_rule() {
        assert_eq!(schwert_max_lag(100), 12);
        assert_eq!(schwert_max_lag(500), 17);
    }

    #[test]
    fn constant_series_errors() {
        assert!(matches!(
            adf_test(&[2.0; 50], Some(1), SignificanceLevel::FivePercent),
            Err(TimeSeriesError::ConstantSeries(_))
        ));
    }

    #[test]
    fn too_short_errors() {
        assert!(matches!(
            adf_test(&[1.0, 2.0, 0.5, 3.0, 1.0], Some(1), SignificanceLevel::FivePercent),
            Err(TimeSeriesError::Insufficient { needed: 12, have: 5 })
        ));
    }

    #[test]
    fn linear_trend_flagged() {
        let y: Vec<f64> = (0..100).map(|t| t as f64).collect();
        let r = adf_test(&y, None, SignificanceLevel::FivePercent).unwrap();
        assert!(r.trend_warning);
        assert!(!r.stationary);
        let noisy: Vec<f64> = ar1(0.5, 200, 3).iter().enumerate().map(|(t, e)| t as f64 * 0.5 + e).collect();
        assert!(adf_test(&noisy, None, SignificanceLevel::FivePercent).unwrap().trend_warning);
        assert!(!adf_test(&ar1(0.5, 200, 3), None, SignificanceLevel::FivePercent).unwrap().trend_warning);
    }

    #[test]
    fn level_parsing() {
        assert_eq!("5%".parse::<SignificanceLevel>().unwrap(), SignificanceLevel::FivePercent);
        assert_eq!("0.01".parse::<SignificanceLevel>().unwrap(), SignificanceLevel::OnePercent);
        assert!("2%".parse::<SignificanceLevel>().is_err());
    }
}
