//! CART-style classification tree with gini or entropy impurity.

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_count, ClassifierError, Result};
use crate::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

impl Criterion {
    /// Impurity of a node from its class counts.
    pub fn impurity(self, counts: &[usize], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        let n = total as f64;
        match self {
            Criterion::Gini => 1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>(),
            Criterion::Entropy => -counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    p * p.log2()
                })
                .sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth: 12,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        /// Impurity decrease scaled by the fraction of training rows reaching this node.
        weighted_decrease: f64,
    },
    Leaf {
        class: usize,
        counts: Vec<usize>,
    },
}

/// A candidate split and its (unweighted) impurity decrease at the node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

// decreases at or below this are treated as no improvement
const MIN_DECREASE: f64 = 1e-12;

fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid < b {
        mid
    } else {
        a
    }
}

/// Exhaustive greedy split search over midpoints of consecutive distinct
/// values. Ties go to the lower feature index, then the lower threshold.
pub fn best_split(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    rows: &[usize],
    features: &[usize],
    criterion: Criterion,
) -> Option<SplitCandidate> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let mut parent_counts = vec![0usize; n_classes];
    for &r in rows {
        parent_counts[y[r]] += 1;
    }
    let parent = criterion.impurity(&parent_counts, n);

    let mut best: Option<SplitCandidate> = None;
    let mut sorted = rows.to_vec();
    let mut left = vec![0usize; n_classes];
    let mut right = vec![0usize; n_classes];
    for &f in features {
        sorted.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(&parent_counts);
        for i in 0..n - 1 {
            let r = sorted[i];
            left[y[r]] += 1;
            right[y[r]] -= 1;
            let (a, b) = (x[[r, f]], x[[sorted[i + 1], f]]);
            if a >= b {
                continue;
            }
            let nl = i + 1;
            let nr = n - nl;
            let child = (nl as f64 * criterion.impurity(&left, nl)
                + nr as f64 * criterion.impurity(&right, nr))
                / n as f64;
            let decrease = parent - child;
            if best.map_or(true, |b| decrease > b.decrease) {
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: midpoint(a, b),
                    decrease,
                });
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    nodes: Vec<Node>,
    params: TreeParams,
    n_features: usize,
    n_classes: usize,
    n_train: usize,
}

/// Chooses candidate features at each node; the full set for a plain tree.
pub(crate) trait FeatureSampler {
    fn candidates(&mut self, n_features: usize) -> Vec<usize>;
}

pub(crate) struct AllFeatures;

impl FeatureSampler for AllFeatures {
    fn candidates(&mut self, n_features: usize) -> Vec<usize> {
        (0..n_features).collect()
    }
}

pub(crate) struct RandomSubset<'a, R: Rng> {
    pub rng: &'a mut R,
    pub size: usize,
}

impl<R: Rng> FeatureSampler for RandomSubset<'_, R> {
    fn candidates(&mut self, n_features: usize) -> Vec<usize> {
        let mut picked = rand::seq::index::sample(self.rng, n_features, self.size).into_vec();
        picked.sort_unstable();
        picked
    }
}

struct Builder<'x, 'y, S> {
    x: ArrayView2<'x, f64>,
    y: &'y [usize],
    n_classes: usize,
    params: TreeParams,
    n_total: usize,
    sampler: S,
    nodes: Vec<Node>,
}

impl<S: FeatureSampler> Builder<'_, '_, S> {
    fn leaf(&mut self, counts: Vec<usize>) -> usize {
        self.nodes.push(Node::Leaf {
            class: argmax_count(&counts),
            counts,
        });
        self.nodes.len() - 1
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &r in &rows {
            counts[self.y[r]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || rows.len() < self.params.min_samples_split {
            return self.leaf(counts);
        }
        let features = self.sampler.candidates(self.x.ncols());
        let split = best_split(self.x, self.y, self.n_classes, &rows, &features, self.params.criterion);
        let Some(split) = split.filter(|s| s.decrease > MIN_DECREASE) else {
            return self.leaf(counts);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x[[r, split.feature]] <= split.threshold);
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: 0,
            counts: Vec::new(),
        });
        let n_samples = rows.len();
        drop(rows);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[idx] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            n_samples,
            weighted_decrease: n_samples as f64 / self.n_total as f64 * split.decrease,
        };
        idx
    }
}

pub(crate) fn validate_params(params: &TreeParams) -> Result<()> {
    if params.min_samples_split < 2 {
        return Err(ClassifierError::Param(
            "min_samples_split must be at least 2".into(),
        ));
    }
    Ok(())
}

pub(crate) fn grow_tree<S: FeatureSampler>(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    rows: Vec<usize>,
    params: TreeParams,
    sampler: S,
) -> DecisionTreeModel {
    let n_train = rows.len();
    let mut builder = Builder {
        x,
        y,
        n_classes,
        params,
        n_total: n_train,
        sampler,
        nodes: Vec::new(),
    };
    builder.grow(rows, 0);
    DecisionTreeModel {
        nodes: builder.nodes,
        params,
        n_features: x.ncols(),
        n_classes,
        n_train,
    }
}

pub fn fit_decision_tree(data: &Dataset, params: &TreeParams) -> Result<DecisionTreeModel> {
    if data.n_rows() == 0 {
        return Err(ClassifierError::Empty);
    }
    validate_params(params)?;
    Ok(grow_tree(
        data.features().view(),
        data.labels(),
        data.n_classes(),
        (0..data.n_rows()).collect(),
        *params,
        AllFeatures,
    ))
}

impl DecisionTreeModel {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                leaf => return leaf,
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        match self.leaf_for(row) {
            Node::Leaf { class, .. } => *class,
            Node::Split { .. } => unreachable!("walk ends at a leaf"),
        }
    }

    /// Per-feature weighted impurity decrease, normalized to sum 1
    /// (all zeros when the tree never split).
    pub fn feature_importances(&self) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_features];
        for node in &self.nodes {
            if let Node::Split {
                feature,
                weighted_decrease,
                ..
            } = node
            {
                scores[*feature] += weighted_decrease;
            }
        }
        let total: f64 = scores.iter().sum();
        if total > 0.0 {
            scores.iter_mut().for_each(|s| *s /= total);
        }
        scores
    }
}
