use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::{argmax_score, ClassifierError, Result};
use crate::dataset::Dataset;

/// Gaussian naive Bayes: per-class independent normal likelihoods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    epsilon: f64,
}

/// `1e-9` times the largest per-feature variance of the data (or `1e-9`
/// when every feature is constant).
pub fn default_epsilon(data: &Dataset) -> f64 {
    let max_var = data
        .features()
        .var_axis(Axis(0), 0.0)
        .iter()
        .copied()
        .fold(0.0, f64::max);
    if max_var > 0.0 {
        1e-9 * max_var
    } else {
        1e-9
    }
}

pub fn fit_gaussian_nb(data: &Dataset, epsilon: f64) -> Result<GaussianNbModel> {
    if !(epsilon > 0.0) {
        return Err(ClassifierError::Param(format!("epsilon must be positive, got {epsilon}")));
    }
    if data.n_rows() == 0 {
        return Err(ClassifierError::Empty);
    }
    let counts = data.class_counts();
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(ClassifierError::MissingClass(missing));
    }
    let x = data.features();
    let (k, m) = (data.n_classes(), data.n_features());
    let mut means = vec![vec![0.0; m]; k];
    for (row, &c) in x.rows().into_iter().zip(data.labels()) {
        for (acc, v) in means[c].iter_mut().zip(row) {
            *acc += v;
        }
    }
    for (c, mean) in means.iter_mut().enumerate() {
        mean.iter_mut().for_each(|v| *v /= counts[c] as f64);
    }
    let mut variances = vec![vec![0.0; m]; k];
    for (row, &c) in x.rows().into_iter().zip(data.labels()) {
        for ((acc, v), mu) in variances[c].iter_mut().zip(row).zip(&means[c]) {
            *acc += (v - mu).powi(2);
        }
    }
    for (c, var) in variances.iter_mut().enumerate() {
        var.iter_mut().for_each(|v| *v = *v / counts[c] as f64 + epsilon);
    }
    let n = data.n_rows() as f64;
    Ok(GaussianNbModel {
        priors: counts.iter().map(|&c| c as f64 / n).collect(),
        means,
        variances,
        epsilon,
    })
}

impl GaussianNbModel {
    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<f64>] {
        &self.variances
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_features(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Log prior plus summed Gaussian log densities, per class.
    pub fn joint_log_likelihood(&self, row: &[f64]) -> Vec<f64> {
        (0..self.priors.len())
            .map(|c| {
                let ll: f64 = row
                    .iter()
                    .zip(&self.means[c])
                    .zip(&self.variances[c])
                    .map(|((x, mu), var)| {
                        -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mu).powi(2) / (2.0 * var)
                    })
                    .sum();
                self.priors[c].ln() + ll
            })
            .collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax_score(&self.joint_log_likelihood(row))
    }
}
