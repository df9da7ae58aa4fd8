//! One-vs-rest gradient boosting with logistic loss and shallow regression trees.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::{argmax_score, ClassifierError, Result};
use crate::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_stages: 100,
            learning_rate: 0.1,
            max_depth: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Least-squares regression tree whose leaves hold a Newton step for the
/// logistic loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<RegNode>,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[RegNode] {
        &self.nodes
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                RegNode::Leaf { value } => return *value,
            }
        }
    }
}

struct RegBuilder<'x, 'r> {
    x: ArrayView2<'x, f64>,
    residual: &'r [f64],
    hessian: &'r [f64],
    max_depth: usize,
    nodes: Vec<RegNode>,
}

impl RegBuilder<'_, '_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let num: f64 = rows.iter().map(|&r| self.residual[r]).sum();
        let den: f64 = rows.iter().map(|&r| self.hessian[r]).sum();
        let value = if den > 1e-12 { num / den } else { 0.0 };
        self.nodes.push(RegNode::Leaf { value });
        self.nodes.len() - 1
    }

    /// Best SSE-reducing split; ties to lower feature, then lower threshold.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| self.residual[r]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = rows.to_vec();
        for f in 0..self.x.ncols() {
            sorted.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]));
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += self.residual[sorted[i]];
                let (a, b) = (self.x[[sorted[i], f]], self.x[[sorted[i + 1], f]]);
                if a >= b {
                    continue;
                }
                let nl = (i + 1) as f64;
                let nr = (n - i - 1) as f64;
                let right_sum = total - left_sum;
                // SSE reduction = sum^2/n over children minus parent
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
                if best.map_or(true, |(_, _, g)| gain > g) {
                    let mid = a + (b - a) / 2.0;
                    best = Some((f, if mid < b { mid } else { a }, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        if depth >= self.max_depth || rows.len() < 2 {
            return self.leaf(&rows);
        }
        let Some((feature, threshold, gain)) = self.best_split(&rows) else {
            return self.leaf(&rows);
        };
        if gain <= 1e-12 {
            return self.leaf(&rows);
        }
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[[i, feature]] <= threshold);
        let idx = self.nodes.len();
        self.nodes.push(RegNode::Leaf { value: 0.0 });
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[idx] = RegNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        idx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbModel {
    initial_scores: Vec<f64>,
    /// `stages[c]` holds class c's trees in fitting order.
    stages: Vec<Vec<RegressionTree>>,
    params: BoostParams,
    n_features: usize,
}

pub fn fit_gradient_boost(data: &Dataset, params: &BoostParams) -> Result<GbModel> {
    if params.n_stages < 1 {
        return Err(ClassifierError::Param("n_stages must be at least 1".into()));
    }
    if data.n_rows() == 0 {
        return Err(ClassifierError::Empty);
    }
    if data.n_classes() < 2 {
        return Err(ClassifierError::Param("gradient boosting needs at least 2 classes".into()));
    }
    let n = data.n_rows();
    let x = data.features().view();
    let counts = data.class_counts();
    let mut initial_scores = Vec::with_capacity(data.n_classes());
    let mut stages = Vec::with_capacity(data.n_classes());
    for (class, &count) in counts.iter().enumerate() {
        let p = (count as f64 / n as f64).clamp(1e-12, 1.0 - 1e-12);
        let init = (p / (1.0 - p)).ln();
        let target: Vec<f64> = data.labels().iter().map(|&c| f64::from(c == class)).collect();
        let mut score = vec![init; n];
        let mut trees = Vec::with_capacity(params.n_stages);
        for _ in 0..params.n_stages {
            let prob: Vec<f64> = score.iter().map(|&s| sigmoid(s)).collect();
            let residual: Vec<f64> = target.iter().zip(&prob).map(|(t, p)| t - p).collect();
            let hessian: Vec<f64> = prob.iter().map(|p| p * (1.0 - p)).collect();
            let mut builder = RegBuilder {
                x,
                residual: &residual,
                hessian: &hessian,
                max_depth: params.max_depth,
                nodes: Vec::new(),
            };
            builder.grow((0..n).collect(), 0);
            let tree = RegressionTree {
                nodes: builder.nodes,
            };
            for (i, s) in score.iter_mut().enumerate() {
                let row: Vec<f64> = x.row(i).to_vec();
                *s += params.learning_rate * tree.predict_row(&row);
            }
            trees.push(tree);
        }
        initial_scores.push(init);
        stages.push(trees);
    }
    Ok(GbModel {
        initial_scores,
        stages,
        params: *params,
        n_features: data.n_features(),
    })
}

impl GbModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &BoostParams {
        &self.params
    }

    pub fn stages(&self) -> &[Vec<RegressionTree>] {
        &self.stages
    }

    pub fn class_scores(&self, row: &[f64]) -> Vec<f64> {
        self.initial_scores
            .iter()
            .zip(&self.stages)
            .map(|(init, trees)| {
                init + trees
                    .iter()
                    .map(|t| self.params.learning_rate * t.predict_row(row))
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax_score(&self.class_scores(row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::testutil::dataset;

    #[test]
    fn separable_line_fits() {
        let d = dataset(&[[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]], &[0, 0, 0, 1, 1, 1]);
        let params = BoostParams {
            n_stages: 10,
            learning_rate: 0.5,
            max_depth: 1,
        };
        let m = fit_gradient_boost(&d, &params).unwrap();
        for (row, &y) in d.features().rows().into_iter().zip(d.labels()) {
            assert_eq!(m.predict_row(row.as_slice().unwrap()), y);
        }
        assert!(m.stages().iter().all(|s| s.len() == 10));
    }

    #[test]
    fn zero_rate_predicts_majority() {
        let d = dataset(&[[0.0], [1.0], [2.0], [3.0], [4.0]], &[0, 1, 1, 2, 1]);
        let params = BoostParams {
            n_stages: 1,
            learning_rate: 0.0,
            max_depth: 3,
        };
        let m = fit_gradient_boost(&d, &params).unwrap();
        for x in [-10.0, 0.0, 3.0, 99.0] {
            assert_eq!(m.predict_row(&[x]), 1);
        }
    }

    #[test]
    fn deterministic() {
        let d = dataset(&[[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 1.0], [4.0, 0.5]], &[0, 1, 0, 2, 1]);
        let p = BoostParams::default();
        assert_eq!(fit_gradient_boost(&d, &p).unwrap(), fit_gradient_boost(&d, &p).unwrap());
    }

    #[test]
    fn zero_stages_rejected() {
        let d = dataset(&[[0.0], [1.0]], &[0, 1]);
        let p = BoostParams {
            n_stages: 0,
            ..Default::default()
        };
        assert!(matches!(fit_gradient_boost(&d, &p), Err(ClassifierError::Param(_))));
    }
}
