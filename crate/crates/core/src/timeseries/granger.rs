use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::ols::rss_lstsq;
use super::{Result, TimeSeriesError, TimeSeriesFrame};

// RSS_u below this fraction of the effect's total sum of squares is a perfect fit
const PERFECT_FIT: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    pub cause: String,
    pub effect: String,
    pub lags: usize,
    pub f_statistic: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub p_value: f64,
    pub level: f64,
    pub causal: bool,
}

/// Bivariate Granger test: does adding `cause`'s lags to an autoregression
/// of `effect` reduce the residual sum of squares?
pub fn granger_test(frame: &TimeSeriesFrame, cause: &str, effect: &str, p: usize, level: f64) -> Result<GrangerResult> {
    if cause == effect {
        return Err(TimeSeriesError::SameSeries(cause.to_string()));
    }
    if p == 0 {
        return Err(TimeSeriesError::Param("lag order must be at least 1".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(TimeSeriesError::Param(format!("level {level} must lie in (0, 1)")));
    }
    let (ci, ei) = (frame.index_of(cause)?, frame.index_of(effect)?);
    let t = frame.n_obs();
    // n = t - p usable rows, 2p + 1 unrestricted regressors
    if t < 3 * p + 2 {
        return Err(TimeSeriesError::Insufficient { needed: 3 * p + 2, have: t });
    }
    let n = t - p;
    let df_den = n - 2 * p - 1;
    let v = frame.values();
    let target = DMatrix::from_fn(n, 1, |r, _| v[(p + r, ei)]);
    let unrestricted = DMatrix::from_fn(n, 1 + 2 * p, |r, c| match c {
        0 => 1.0,
        c if c <= p => v[(p + r - c, ei)],
        c => v[(p + r - (c - p), ci)],
    });
    let restricted = unrestricted.columns(0, 1 + p).into_owned();

    let rss_r = rss_lstsq(&restricted, &target)?;
    let rss_u = rss_lstsq(&unrestricted, &target)?;
    let mean = target.mean();
    let tss = target.iter().map(|y| (y - mean).powi(2)).sum::<f64>();
    if rss_u <= PERFECT_FIT * tss.max(f64::MIN_POSITIVE) {
        return Err(TimeSeriesError::DegenerateFit(effect.to_string()));
    }
    let f = (((rss_r - rss_u) / p as f64) / (rss_u / df_den as f64)).max(0.0);
    let (d1, d2) = (p as f64, df_den as f64);
    let p_value = beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
    Ok(GrangerResult {
        cause: cause.to_string(),
        effect: effect.to_string(),
        lags: p,
        f_statistic: f,
        df_num: p,
        df_den,
        p_value,
        level,
        causal: p_value < level,
    })
}

/// Every ordered pair of distinct series, cause-major in frame order.
pub fn granger_all_pairs(frame: &TimeSeriesFrame, p: usize, level: f64) -> Result<Vec<GrangerResult>> {
    let names = frame.names();
    let mut out = Vec::new();
    for cause in names {
        for effect in names {
            if cause != effect {
                out.push(granger_test(frame, cause, effect, p, level)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};

    fn pair(seed: u64, t: usize, coupling: f64) -> TimeSeriesFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..t).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut y = vec![0.0; t];
        for i in 0..t {
            let e: f64 = StandardNormal.sample(&mut rng);
            y[i] = if i > 0 { coupling * x[i - 1] } else { 0.0 } + e;
        }
        let v = Array2::from_shape_fn((t, 2), |(i, j)| if j == 0 { x[i] } else { y[i] });
        TimeSeriesFrame::new(v, vec!["x".into(), "y".into()]).unwrap()
    }

    #[test]
    fn planted_causality_detected() {
        let hits = (0..20)
            .filter(|&s| granger_test(&pair(s, 500, 0.8), "x", "y", 1, 0.05).unwrap().causal)
            .count();
        assert!(hits >= 18, "{hits}/20");
    }

    #[test]
    fn white_noise_size() {
        let hits = (0..20)
            .filter(|&s| granger_test(&pair(100 + s, 500, 0.0), "x", "y", 1, 0.05).unwrap().causal)
            .count();
        assert!(hits <= 3, "{hits}/20");
    }

    #[test]
    fn p_value_matches_f_distribution() {
        let f = pair(4, 200, 0.1);
        for p in 1..=3 {
            let r = granger_test(&f, "x", "y", p, 0.05).unwrap();
            assert_eq!(r.df_den, 200 - p - 2 * p - 1);
            let dist = FisherSnedecor::new(r.df_num as f64, r.df_den as f64).unwrap();
            assert!((r.p_value - (1.0 - dist.cdf(r.f_statistic))).abs() < 1e-9);
            assert_eq!(r.causal, r.p_value < 0.05);
        }
    }

    #[test]
    fn f_matches_explicit_regressions() {
        let f = pair(6, 80, 0.5);
        let r = granger_test(&f, "x", "y", 2, 0.05).unwrap();
        // normal-equation oracle
        let v = f.values();
        let rss = |cols: &dyn Fn(usize) -> Vec<f64>, k: usize| {
            let n = 78;
            let x = DMatrix::from_fn(n, k, |r, c| cols(r + 2)[c]);
            let y = DMatrix::from_fn(n, 1, |r, _| v[(r + 2, 1)]);
            let b = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
            (&y - &x * b).norm_squared()
        };
        let rr = rss(&|t| vec![1.0, v[(t - 1, 1)], v[(t - 2, 1)]], 3);
        let ru = rss(&|t| vec![1.0, v[(t - 1, 1)], v[(t - 2, 1)], v[(t - 1, 0)], v[(t - 2, 0)]], 5);
        let expected = ((rr - ru) / 2.0) / (ru / 73.0);
        assert!((r.f_statistic - expected).abs() < 1e-8 * expected.max(1.0));
    }

    #[test]
    fn redundant_cause_gives_zero_f() {
        // the cause's lags are the effect's own lags
        let y = pair(8, 100, 0.0).column(1);
        let same = TimeSeriesFrame::new(
            Array2::from_shape_fn((100, 2), |(i, _)| y[i]),
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let r = granger_test(&same, "x", "y", 2, 0.05).unwrap();
        assert!(r.f_statistic < 1e-6, "{}", r.f_statistic);
        assert!(!r.causal);
    }

    #[test]
    fn bidirectional_flags_both() {
        let t = 500;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut v = Array2::<f64>::zeros((t, 2));
        for i in 1..t {
            let (a, b): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            v[(i, 0)] = 0.3 * v[(i - 1, 0)] + 0.5 * v[(i - 1, 1)] + a;
            v[(i, 1)] = 0.5 * v[(i - 1, 0)] + 0.2 * v[(i - 1, 1)] + b;
        }
        let f = TimeSeriesFrame::new(v, vec!["x".into(), "y".into()]).unwrap();
        let all = granger_all_pairs(&f, 1, 0.05).unwrap();
        assert_eq!(all.len(), 2);
        assert!(all.iter().all(|r| r.causal));
    }

    #[test]
    fn errors() {
        let f = pair(1, 50, 0.5);
        assert!(matches!(granger_test(&f, "x", "x", 1, 0.05), Err(TimeSeriesError::SameSeries(_))));
        assert!(matches!(granger_test(&f, "x", "z", 1, 0.05), Err(TimeSeriesError::UnknownSeries(_))));
        let exact = TimeSeriesFrame::new(
            Array2::from_shape_fn((30, 2), |(i, j)| if j == 0 { (i as f64).sin() } else { ((i as f64) - 1.0).sin() }),
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        assert!(matches!(granger_test(&exact, "x", "y", 1, 0.05), Err(TimeSeriesError::DegenerateFit(_))));
    }
}
