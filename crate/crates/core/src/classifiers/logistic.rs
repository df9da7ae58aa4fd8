use serde::{Deserialize, Serialize};

use super::{argmax_score, ClassifierError, Result};
use crate::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            learning_rate: 0.1,
            max_iterations: 2000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryScorer {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

impl BinaryScorer {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// One-vs-rest logistic regression; one binary scorer per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegOvrModel {
    scorers: Vec<BinaryScorer>,
    params: LogRegParams,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn fit_binary(data: &Dataset, positive: usize, params: &LogRegParams) -> BinaryScorer {
    let x = data.features();
    let n = data.n_rows() as f64;
    let m = data.n_features();
    let targets: Vec<f64> = data.labels().iter().map(|&c| f64::from(c == positive)).collect();
    let mut weights = vec![0.0; m];
    let mut bias = 0.0;
    let mut iterations = 0;
    let mut grad_w = vec![0.0; m];
    while iterations < params.max_iterations {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (row, t) in x.rows().into_iter().zip(&targets) {
            let z = bias + row.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>();
            let err = sigmoid(z) - t;
            grad_b += err;
            for (g, a) in grad_w.iter_mut().zip(row) {
                *g += err * a;
            }
        }
        grad_b /= n;
        grad_w.iter_mut().for_each(|g| *g /= n);
        let norm = grad_w.iter().fold(grad_b.abs(), |acc, g| acc.max(g.abs()));
        if norm < params.tolerance {
            break;
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= params.learning_rate * g;
        }
        bias -= params.learning_rate * grad_b;
        iterations += 1;
    }
    BinaryScorer {
        weights,
        bias,
        iterations,
    }
}

pub fn fit_logreg_ovr(data: &Dataset, params: &LogRegParams) -> Result<LogRegOvrModel> {
    if data.n_rows() == 0 {
        return Err(ClassifierError::Empty);
    }
    if data.n_classes() < 2 {
        return Err(ClassifierError::Param("logistic regression needs at least 2 classes".into()));
    }
    if data.features().iter().any(|v| !v.is_finite()) {
        return Err(ClassifierError::NonFinite);
    }
    let scorers = (0..data.n_classes())
        .map(|c| fit_binary(data, c, params))
        .collect();
    Ok(LogRegOvrModel {
        scorers,
        params: *params,
    })
}

impl LogRegOvrModel {
    pub fn scorers(&self) -> &[BinaryScorer] {
        &self.scorers
    }

    pub fn params(&self) -> &LogRegParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.scorers[0].weights.len()
    }

    /// Per-class probability of "this class vs the rest".
    pub fn class_probabilities(&self, row: &[f64]) -> Vec<f64> {
        self.scorers.iter().map(|s| sigmoid(s.decision(row))).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let scores: Vec<f64> = self.scorers.iter().map(|s| s.decision(row)).collect();
        argmax_score(&scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::testutil::dataset;

    fn line() -> Dataset {
        dataset(&[[-2.0], [-1.0], [1.0], [2.0]], &[0, 0, 1, 1])
    }

    #[test]
    fn separable_line_fits() {
        let m = fit_logreg_ovr(&line(), &LogRegParams::default()).unwrap();
        for (x, y) in [(-2.0, 0), (-1.0, 0), (1.0, 1), (2.0, 1)] {
            assert_eq!(m.predict_row(&[x]), y);
        }
    }

    #[test]
    fn symmetry_point_is_half() {
        let m = fit_logreg_ovr(&line(), &LogRegParams::default()).unwrap();
        for p in m.class_probabilities(&[0.0]) {
            assert!((p - 0.5).abs() <= 1e-6, "{p}");
        }
    }

    #[test]
    fn zero_iterations_is_identity() {
        let params = LogRegParams {
            max_iterations: 0,
            ..Default::default()
        };
        let m = fit_logreg_ovr(&line(), &params).unwrap();
        assert!(m.scorers().iter().all(|s| s.weights == [0.0] && s.bias == 0.0));
        assert_eq!(m.class_probabilities(&[3.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn non_finite_rejected() {
        let d = dataset(&[[f64::NAN], [1.0]], &[0, 1]);
        assert!(matches!(fit_logreg_ovr(&d, &LogRegParams::default()), Err(ClassifierError::NonFinite)));
    }

    #[test]
    fn single_class_rejected() {
        let d = dataset(&[[0.0], [1.0]], &[0, 0]);
        assert!(matches!(fit_logreg_ovr(&d, &LogRegParams::default()), Err(ClassifierError::Param(_))));
    }

    #[test]
    fn stops_on_small_gradient() {
        let params = LogRegParams {
            tolerance: 0.3,
            ..Default::default()
        };
        let m = fit_logreg_ovr(&line(), &params).unwrap();
        assert!(m.scorers().iter().all(|s| s.iterations < 2000));
    }
}
