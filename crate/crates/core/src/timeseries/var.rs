use nalgebra::DMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ols::qr_fit;
use super::{rmse, Result, TimeSeriesError, TimeSeriesFrame};

/// Least-squares VAR(p) fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    pub order: usize,
    pub intercept: Vec<f64>,
    /// `coefficients[l]` is `A_{l+1}`; entry `(i, j)` is the effect of
    /// series `j` at that lag on series `i`.
    pub coefficients: Vec<Array2<f64>>,
    pub residuals: Array2<f64>,
    pub sigma: Array2<f64>,
    pub names: Vec<String>,
    pub t_effective: usize,
}

impl VarModel {
    pub fn n_series(&self) -> usize {
        self.intercept.len()
    }

    /// Next value given lags ordered most recent first.
    pub fn predict_next(&self, lags: &[&[f64]]) -> Vec<f64> {
        let m = self.n_series();
        (0..m)
            .map(|i| {
                let mut v = self.intercept[i];
                for (a, y) in self.coefficients.iter().zip(lags) {
                    for j in 0..m {
                        v += a[(i, j)] * y[j];
                    }
                }
                v
            })
            .collect()
    }
}

/// Smallest `T` for which an order-`p` fit on `m` series has more rows than
/// regressors.
pub fn min_observations(m: usize, p: usize) -> usize {
    m * p + p + 2
}

pub fn fit_var(frame: &TimeSeriesFrame, p: usize) -> Result<VarModel> {
    fit_from(frame, p, p)
}

// Fits using targets t = start..T, so candidates with different p can share a sample.
fn fit_from(frame: &TimeSeriesFrame, p: usize, start: usize) -> Result<VarModel> {
    if p == 0 {
        return Err(TimeSeriesError::Param("VAR order must be at least 1".into()));
    }
    let (t, m) = (frame.n_obs(), frame.n_series());
    let needed = min_observations(m, p).max(start + m * p + 2);
    if t < needed {
        return Err(TimeSeriesError::Insufficient { needed, have: t });
    }
    let y = frame.values();
    let n = t - start;
    let k = 1 + m * p;
    let x = DMatrix::from_fn(n, k, |r, c| {
        if c == 0 {
            1.0
        } else {
            let lag = (c - 1) / m + 1;
            y[(start + r - lag, (c - 1) % m)]
        }
    });
    let targets = DMatrix::from_fn(n, m, |r, c| y[(start + r, c)]);
    let names = frame.names();
    let fit = qr_fit(&x, &targets, |c| {
        if c == 0 {
            "intercept".to_string()
        } else {
            format!("{} lag {}", names[(c - 1) % m], (c - 1) / m + 1)
        }
    })?;

    let intercept = (0..m).map(|i| fit.coef[(0, i)]).collect();
    let coefficients = (0..p)
        .map(|l| Array2::from_shape_fn((m, m), |(i, j)| fit.coef[(1 + l * m + j, i)]))
        .collect();
    let residuals = Array2::from_shape_fn((n, m), |(r, c)| fit.residuals[(r, c)]);
    let cross = fit.residuals.tr_mul(&fit.residuals) / n as f64;
    let sigma = Array2::from_shape_fn((m, m), |(i, j)| 0.5 * (cross[(i, j)] + cross[(j, i)]));
    Ok(VarModel {
        order: p,
        intercept,
        coefficients,
        residuals,
        sigma,
        names: names.to_vec(),
        t_effective: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSelection {
    /// `(p, AIC(p))` for every candidate.
    pub candidates: Vec<(usize, f64)>,
    pub chosen: usize,
    pub t_effective: usize,
}

pub fn aic(model: &VarModel) -> Result<f64> {
    let m = model.n_series();
    let sigma = DMatrix::from_fn(m, m, |i, j| model.sigma[(i, j)]);
    let det = sigma.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(TimeSeriesError::Numerical(format!(
            "residual covariance determinant {det} is not positive"
        )));
    }
    let params = (m * m * model.order + m) as f64;
    Ok(det.ln() + 2.0 * params / model.t_effective as f64)
}

/// AIC over orders `1..=p_max` on the common sample starting after `p_max`.
pub fn select_order(frame: &TimeSeriesFrame, p_max: usize) -> Result<LagSelection> {
    if p_max == 0 {
        return Err(TimeSeriesError::Param("p_max must be at least 1".into()));
    }
    let mut candidates = Vec::with_capacity(p_max);
    let mut t_effective = 0;
    for p in 1..=p_max {
        let model = fit_from(frame, p, p_max)?;
        t_effective = model.t_effective;
        candidates.push((p, aic(&model)?));
    }
    let mut chosen = candidates[0];
    for &c in &candidates[1..] {
        if c.1 < chosen.1 {
            chosen = c;
        }
    }
    Ok(LagSelection {
        candidates,
        chosen: chosen.0,
        t_effective,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    /// Observed values replace lags after every step.
    #[default]
    OneStepWithActuals,
    /// Predictions are fed back as lags.
    Recursive,
}

impl std::str::FromStr for ForecastMode {
    type Err = TimeSeriesError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_step_with_actuals" | "one-step" => Ok(ForecastMode::OneStepWithActuals),
            "recursive" => Ok(ForecastMode::Recursive),
            other => Err(TimeSeriesError::Param(format!("unknown forecast mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub names: Vec<String>,
    pub mode: ForecastMode,
    /// `horizon × m`.
    pub predicted: Array2<f64>,
    pub actual: Option<Array2<f64>>,
    pub rmse: Option<Vec<f64>>,
}

/// Forecasts `horizon` steps past the end of `history`. `actuals`, when
/// given, holds the observed window and must cover the horizon; one-step
/// mode needs it for every step after the first.
pub fn forecast(
    model: &VarModel,
    history: &TimeSeriesFrame,
    actuals: Option<&TimeSeriesFrame>,
    horizon: usize,
    mode: ForecastMode,
) -> Result<ForecastResult> {
    if horizon < 1 {
        return Err(TimeSeriesError::Param("horizon must be at least 1".into()));
    }
    let (m, p) = (model.n_series(), model.order);
    if history.names() != model.names.as_slice() {
        return Err(TimeSeriesError::Frame("history series do not match the model".into()));
    }
    if history.n_obs() < p {
        return Err(TimeSeriesError::Insufficient {
            needed: p,
            have: history.n_obs(),
        });
    }
    let actual = match actuals {
        Some(a) => {
            if a.names() != model.names.as_slice() {
                return Err(TimeSeriesError::Frame("actual series do not match the model".into()));
            }
            if a.n_obs() < horizon {
                return Err(TimeSeriesError::Insufficient {
                    needed: horizon,
                    have: a.n_obs(),
                });
            }
            Some(a.values().slice(ndarray::s![..horizon, ..]).to_owned())
        }
        None if mode == ForecastMode::OneStepWithActuals && horizon > 1 => {
            return Err(TimeSeriesError::Param(
                "one-step forecasting past the first step needs observed values".into(),
            ))
        }
        None => None,
    };

    // most recent first
    let h = history.values();
    let mut lags: Vec<Vec<f64>> = (1..=p).map(|l| h.row(h.nrows() - l).to_vec()).collect();
    let mut predicted = Array2::zeros((horizon, m));
    for step in 0..horizon {
        let next = {
            let views: Vec<&[f64]> = lags.iter().map(Vec::as_slice).collect();
            model.predict_next(&views)
        };
        predicted.row_mut(step).assign(&ndarray::ArrayView1::from(&next));
        let fed = match (mode, &actual) {
            (ForecastMode::OneStepWithActuals, Some(a)) => a.row(step).to_vec(),
            _ => next,
        };
        lags.pop();
        lags.insert(0, fed);
    }
    let rmse = match &actual {
        Some(a) => Some(
            (0..m)
                .map(|j| rmse(&a.column(j).to_vec(), &predicted.column(j).to_vec()))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(ForecastResult {
        names: model.names.clone(),
        mode,
        predicted,
        actual,
        rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("s{i}")).collect()
    }

    // y_t = alpha + sum_l A_l y_{t-l} + noise, after a burn-in
    fn simulate(alpha: &[f64], coefs: &[Array2<f64>], t: usize, sigma: f64, seed: u64) -> TimeSeriesFrame {
        let m = alpha.len();
        let p = coefs.len();
        let burn = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
        let mut rows: Vec<Vec<f64>> = vec![vec![0.0; m]; p];
        for _ in 0..t + burn {
            let n = rows.len();
            let next: Vec<f64> = (0..m)
                .map(|i| {
                    let mut v = alpha[i];
                    for (l, a) in coefs.iter().enumerate() {
                        for j in 0..m {
                            v += a[(i, j)] * rows[n - 1 - l][j];
                        }
                    }
                    if sigma > 0.0 {
                        v + noise.sample(&mut rng)
                    } else {
                        v
                    }
                })
                .collect();
            rows.push(next);
        }
        let kept = &rows[rows.len() - t..];
        TimeSeriesFrame::new(Array2::from_shape_fn((t, m), |(i, j)| kept[i][j]), names(m)).unwrap()
    }

    fn a4() -> Array2<f64> {
        array![
            [0.5, 0.1, 0.0, 0.0],
            [0.0, 0.4, 0.2, 0.0],
            [0.1, 0.0, 0.3, 0.1],
            [0.0, 0.0, 0.1, 0.6]
        ]
    }

    // exact recurrence from x0; a damped rotation keeps the design full rank
    fn spiral(alpha: [f64; 2], x0: [f64; 2], t: usize) -> TimeSeriesFrame {
        let a = rotation();
        let mut vals = Array2::zeros((t, 2));
        vals.row_mut(0).assign(&ndarray::arr1(&x0));
        for r in 1..t {
            let prev = vals.row(r - 1).to_owned();
            for i in 0..2 {
                vals[(r, i)] = alpha[i] + a[(i, 0)] * prev[0] + a[(i, 1)] * prev[1];
            }
        }
        TimeSeriesFrame::new(vals, names(2)).unwrap()
    }

    fn rotation() -> Array2<f64> {
        array![[0.6, -0.7], [0.7, 0.6]]
    }

    #[test]
    fn zero_noise_recovery() {
        let model = fit_var(&spiral([0.0, 0.0], [1.0, 0.5], 40), 1).unwrap();
        let a = rotation();
        for i in 0..2 {
            assert!(model.intercept[i].abs() < 1e-8);
            for j in 0..2 {
                assert!((model.coefficients[0][(i, j)] - a[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn noisy_var1_recovery() {
        let a = a4();
        let f = simulate(&[1.0, -0.5, 0.2, 0.0], &[a.clone()], 2000, 0.1, 7);
        let model = fit_var(&f, 1).unwrap();
        let err = (&model.coefficients[0] - &a).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err <= 0.05, "max coefficient error {err}");
        assert_eq!(model.t_effective, 1999);
    }

    #[test]
    fn residual_properties() {
        let f = simulate(&[0.3, 0.1, 0.0, -0.2], &[a4()], 300, 0.5, 2);
        let model = fit_var(&f, 2).unwrap();
        let y = f.values();
        let n = model.t_effective;
        for i in 0..4 {
            let e = model.residuals.column(i);
            assert!(e.sum().abs() < 1e-6);
            for l in 1..=2 {
                for j in 0..4 {
                    let dot: f64 = (0..n).map(|r| e[r] * y[(2 + r - l, j)]).sum();
                    assert!(dot.abs() < 1e-6, "residual not orthogonal: {dot}");
                }
            }
        }
        // independent covariance oracle
        for i in 0..4 {
            for j in 0..4 {
                let direct: f64 = (0..n).map(|r| model.residuals[(r, i)] * model.residuals[(r, j)]).sum::<f64>() / n as f64;
                assert!((model.sigma[(i, j)] - direct).abs() < 1e-12);
                assert_eq!(model.sigma[(i, j)], model.sigma[(j, i)]);
            }
        }
        let s = DMatrix::from_fn(4, 4, |i, j| model.sigma[(i, j)]);
        assert!(s.symmetric_eigenvalues().iter().all(|&v| v >= -1e-8));
    }

    #[test]
    fn constant_column_rank_deficient() {
        let mut f = simulate(&[0.0, 0.0], &[array![[0.5, 0.0], [0.0, 0.5]]], 50, 1.0, 1).values().clone();
        f.column_mut(1).fill(3.0);
        let frame = TimeSeriesFrame::new(f, vec!["Temp".into(), "Gas".into()]).unwrap();
        match fit_var(&frame, 1) {
            Err(TimeSeriesError::RankDeficient { column }) => assert_eq!(column, "Gas lag 1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn insufficient_rows() {
        let f = simulate(&[0.0, 0.0], &[array![[0.5, 0.0], [0.0, 0.5]]], 5, 1.0, 1);
        match fit_var(&f, 2) {
            Err(TimeSeriesError::Insufficient { needed, have }) => assert_eq!((needed, have), (8, 5)),
            other => panic!("{other:?}"),
        }
        assert!(fit_var(&f, 0).is_err());
    }

    #[test]
    fn forecast_exact_recurrence() {
        let model = VarModel {
            order: 1,
            intercept: vec![0.0, 0.0],
            coefficients: vec![array![[0.5, 0.0], [0.0, 0.5]]],
            residuals: Array2::zeros((0, 2)),
            sigma: Array2::zeros((2, 2)),
            names: names(2),
            t_effective: 0,
        };
        let hist = TimeSeriesFrame::new(array![[9.0, 9.0], [2.0, 4.0]], names(2)).unwrap();
        let r = forecast(&model, &hist, None, 1, ForecastMode::OneStepWithActuals).unwrap();
        assert_eq!(r.predicted.row(0).to_vec(), vec![1.0, 2.0]);
        let r = forecast(&model, &hist, None, 3, ForecastMode::Recursive).unwrap();
        assert_eq!(r.predicted.row(2).to_vec(), vec![0.25, 0.5]);
        assert!(forecast(&model, &hist, None, 0, ForecastMode::Recursive).is_err());
        assert!(forecast(&model, &hist, None, 2, ForecastMode::OneStepWithActuals).is_err());
    }

    #[test]
    fn zero_noise_forecast_matches_actuals() {
        let f = spiral([0.5, -0.25], [3.0, 1.0], 40);
        let (train, test) = super::super::chrono_split(&f, 5).unwrap();
        let model = fit_var(&train, 1).unwrap();
        for mode in [ForecastMode::OneStepWithActuals, ForecastMode::Recursive] {
            let r = forecast(&model, &train, Some(&test), 5, mode).unwrap();
            let diff = (&r.predicted - r.actual.as_ref().unwrap()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(diff < 1e-9, "{mode:?}: {diff}");
            assert!(r.rmse.unwrap().iter().all(|&v| v < 1e-9));
        }
    }

    #[test]
    fn one_step_beats_recursive_on_average() {
        let (mut one, mut rec) = (0.0, 0.0);
        for seed in 0..20 {
            let f = simulate(&[0.0; 4], &[a4()], 400, 1.0, 100 + seed);
            let (train, test) = super::super::chrono_split(&f, 5).unwrap();
            let model = fit_var(&train, 1).unwrap();
            let mean = |r: ForecastResult| r.rmse.unwrap().iter().sum::<f64>() / 4.0;
            one += mean(forecast(&model, &train, Some(&test), 5, ForecastMode::OneStepWithActuals).unwrap());
            rec += mean(forecast(&model, &train, Some(&test), 5, ForecastMode::Recursive).unwrap());
        }
        assert!(one <= rec, "one-step {one} recursive {rec}");
    }

    #[test]
    fn aic_recovers_order_two() {
        let a1 = a4();
        let a2 = array![
            [0.2, 0.0, 0.0, 0.0],
            [0.0, 0.25, 0.0, 0.0],
            [0.0, 0.1, 0.2, 0.0],
            [0.0, 0.0, 0.0, 0.2]
        ];
        let hits = (0..20)
            .filter(|&seed| {
                let f = simulate(&[1.0, 0.5, 0.0, -1.0], &[a1.clone(), a2.clone()], 2000, 1.0, seed);
                select_order(&f, 6).unwrap().chosen == 2
            })
            .count();
        assert!(hits >= 18, "{hits}/20");
    }

    #[test]
    fn aic_white_noise_prefers_order_one() {
        let zero = Array2::zeros((3, 3));
        let hits = (0..20)
            .filter(|&seed| {
                let f = simulate(&[0.0; 3], &[zero.clone()], 2000, 1.0, 500 + seed);
                select_order(&f, 4).unwrap().chosen == 1
            })
            .count();
        assert!(hits >= 15, "{hits}/20");
    }

    #[test]
    fn aic_oracle_and_common_sample() {
        let f = simulate(&[0.0, 0.0], &[array![[0.5, 0.1], [0.2, 0.3]]], 200, 1.0, 4);
        let sel = select_order(&f, 3).unwrap();
        assert_eq!(sel.t_effective, 197);
        assert_eq!(sel.candidates.len(), 3);
        // p = 1 on the shortened sample, recomputed by hand
        let shifted = f.rows(2, 200).unwrap();
        let m1 = fit_var(&shifted, 1).unwrap();
        assert_eq!(m1.t_effective, 197);
        let s = &m1.sigma;
        let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
        let expected = det.ln() + 2.0 * 6.0 / 197.0;
        assert!((sel.candidates[0].1 - expected).abs() < 1e-10);
        assert_eq!(select_order(&f, 1).unwrap().chosen, 1);
        assert!(select_order(&f, 0).is_err());
    }
}
