//! Six supervised learners behind one train/predict contract.
//!
//! | name | model |
//! |------|-------|
//! | `dt` | [`DecisionTreeModel`] |
//! | `rf` | [`ForestModel`] |
//! | `gb` | [`GbModel`] (one-vs-rest logistic boosting) |
//! | `knn` | [`KnnModel`] |
//! | `nb` | [`GaussianNbModel`] |
//! | `lr` | [`LogRegOvrModel`] (one-vs-rest) |
//!
//! Every tie (split choice, vote, neighbour distance, argmax) resolves to
//! the lowest index, so fits and predictions are reproducible bit for bit.

pub mod boosting;
pub mod forest;
pub mod knn;
pub mod logistic;
pub mod naive_bayes;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use boosting::{fit_gradient_boost, BoostParams, GbModel};
pub use forest::{fit_random_forest, ForestModel, ForestParams};
pub use knn::{fit_knn, KnnModel};
pub use logistic::{fit_logreg_ovr, LogRegOvrModel, LogRegParams};
pub use naive_bayes::{default_epsilon, fit_gaussian_nb, GaussianNbModel};
pub use tree::{fit_decision_tree, Criterion, DecisionTreeModel, Node, TreeParams};

use crate::dataset::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("empty training data")]
    Empty,
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("shape mismatch: model expects {expected} features, got {found}")]
    Shape { expected: usize, found: usize },
    #[error("non-finite feature value")]
    NonFinite,
    #[error("class code {0} has no training rows")]
    MissingClass(usize),
    #[error("{0} models do not provide feature importances")]
    Unsupported(&'static str),
    #[error("unknown classifier `{0}`; expected one of dt, rf, gb, knn, nb, lr")]
    UnknownKind(String),
    #[error("unsupported model dump version {0}")]
    DumpVersion(u32),
}

pub type Result<T> = std::result::Result<T, ClassifierError>;

/// Index of the largest count; ties go to the lowest index.
pub(crate) fn argmax_count(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest score; ties go to the lowest index.
pub(crate) fn argmax_score(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Dt,
    Rf,
    Gb,
    Knn,
    Nb,
    Lr,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::Dt,
        ClassifierKind::Rf,
        ClassifierKind::Gb,
        ClassifierKind::Knn,
        ClassifierKind::Nb,
        ClassifierKind::Lr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Dt => "dt",
            ClassifierKind::Rf => "rf",
            ClassifierKind::Gb => "gb",
            ClassifierKind::Knn => "knn",
            ClassifierKind::Nb => "nb",
            ClassifierKind::Lr => "lr",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ClassifierError::UnknownKind(s.to_string()))
    }
}

/// Hyperparameters for every learner; only the chosen kind's block is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub boost: BoostParams,
    pub knn_k: usize,
    /// `None` selects [`default_epsilon`] for the training data.
    pub nb_epsilon: Option<f64>,
    pub logreg: LogRegParams,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            boost: BoostParams::default(),
            knn_k: 5,
            nb_epsilon: None,
            logreg: LogRegParams::default(),
        }
    }
}

impl ClassifierConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.forest.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedClassifier {
    Dt(DecisionTreeModel),
    Rf(ForestModel),
    Gb(GbModel),
    Knn(KnnModel),
    Nb(GaussianNbModel),
    Lr(LogRegOvrModel),
}

pub fn fit(kind: ClassifierKind, data: &Dataset, config: &ClassifierConfig) -> Result<TrainedClassifier> {
    Ok(match kind {
        ClassifierKind::Dt => TrainedClassifier::Dt(fit_decision_tree(data, &config.tree)?),
        ClassifierKind::Rf => {
            let params = ForestParams {
                tree: config.tree,
                ..config.forest
            };
            TrainedClassifier::Rf(fit_random_forest(data, &params)?)
        }
        ClassifierKind::Gb => TrainedClassifier::Gb(fit_gradient_boost(data, &config.boost)?),
        ClassifierKind::Knn => TrainedClassifier::Knn(fit_knn(data, config.knn_k)?),
        ClassifierKind::Nb => {
            let eps = config.nb_epsilon.unwrap_or_else(|| default_epsilon(data));
            TrainedClassifier::Nb(fit_gaussian_nb(data, eps)?)
        }
        ClassifierKind::Lr => TrainedClassifier::Lr(fit_logreg_ovr(data, &config.logreg)?),
    })
}

impl TrainedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedClassifier::Dt(_) => ClassifierKind::Dt,
            TrainedClassifier::Rf(_) => ClassifierKind::Rf,
            TrainedClassifier::Gb(_) => ClassifierKind::Gb,
            TrainedClassifier::Knn(_) => ClassifierKind::Knn,
            TrainedClassifier::Nb(_) => ClassifierKind::Nb,
            TrainedClassifier::Lr(_) => ClassifierKind::Lr,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedClassifier::Dt(m) => m.n_features(),
            TrainedClassifier::Rf(m) => m.n_features(),
            TrainedClassifier::Gb(m) => m.n_features(),
            TrainedClassifier::Knn(m) => m.n_features(),
            TrainedClassifier::Nb(m) => m.n_features(),
            TrainedClassifier::Lr(m) => m.n_features(),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        match self {
            TrainedClassifier::Dt(m) => m.predict_row(row),
            TrainedClassifier::Rf(m) => m.predict_row(row),
            TrainedClassifier::Gb(m) => m.predict_row(row),
            TrainedClassifier::Knn(m) => m.predict_row(row),
            TrainedClassifier::Nb(m) => m.predict_row(row),
            TrainedClassifier::Lr(m) => m.predict_row(row),
        }
    }

    pub fn predict(&self, rows: &Array2<f64>) -> Result<Vec<usize>> {
        if rows.ncols() != self.n_features() {
            return Err(ClassifierError::Shape {
                expected: self.n_features(),
                found: rows.ncols(),
            });
        }
        Ok(rows
            .rows()
            .into_iter()
            .map(|r| self.predict_row(&r.to_vec()))
            .collect())
    }

    /// Compact description: kind, hyperparameters and tree shapes.
    pub fn summary(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            TrainedClassifier::Dt(m) => json!({
                "kind": "dt",
                "params": m.params(),
                "nodes": m.nodes().len(),
                "leaves": m.n_leaves(),
                "depth": m.depth(),
                "importances": m.feature_importances(),
            }),
            TrainedClassifier::Rf(m) => json!({
                "kind": "rf",
                "trees": m.trees().len(),
                "features_per_split": m.features_per_split(),
                "bootstrap": m.bootstrap(),
                "master_seed": m.master_seed(),
                "total_nodes": m.trees().iter().map(|t| t.nodes().len()).sum::<usize>(),
                "max_depth_reached": m.trees().iter().map(DecisionTreeModel::depth).max(),
                "importances": m.feature_importances(),
            }),
            TrainedClassifier::Gb(m) => json!({
                "kind": "gb",
                "params": m.params(),
                "classes": m.stages().len(),
            }),
            TrainedClassifier::Knn(m) => json!({ "kind": "knn", "k": m.k(), "stored_rows": m.n_stored() }),
            TrainedClassifier::Nb(m) => json!({ "kind": "nb", "epsilon": m.epsilon(), "priors": m.priors() }),
            TrainedClassifier::Lr(m) => json!({
                "kind": "lr",
                "params": m.params(),
                "iterations": m.scorers().iter().map(|s| s.iterations).collect::<Vec<_>>(),
            }),
        }
    }
}

/// Normalized per-feature importance scores aligned with feature names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
}

impl ImportanceVector {
    /// `(name, score)` pairs sorted by descending score; equal scores keep column order.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut pairs: Vec<(&str, f64)> = self
            .feature_names
            .iter()
            .map(String::as_str)
            .zip(self.scores.iter().copied())
            .collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        pairs
    }
}

pub fn feature_importances(model: &TrainedClassifier, feature_names: &[String]) -> Result<ImportanceVector> {
    let scores = match model {
        TrainedClassifier::Dt(m) => m.feature_importances(),
        TrainedClassifier::Rf(m) => m.feature_importances(),
        TrainedClassifier::Gb(_) => return Err(ClassifierError::Unsupported("gradient boosting")),
        TrainedClassifier::Knn(_) => return Err(ClassifierError::Unsupported("nearest-neighbour")),
        TrainedClassifier::Nb(_) => return Err(ClassifierError::Unsupported("naive Bayes")),
        TrainedClassifier::Lr(_) => return Err(ClassifierError::Unsupported("logistic regression")),
    };
    if scores.len() != feature_names.len() {
        return Err(ClassifierError::Shape {
            expected: scores.len(),
            found: feature_names.len(),
        });
    }
    Ok(ImportanceVector {
        feature_names: feature_names.to_vec(),
        scores,
    })
}

pub const MODEL_DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub model: TrainedClassifier,
}

impl ModelDump {
    pub fn new(model: TrainedClassifier, data: &Dataset) -> Self {
        ModelDump {
            format_version: MODEL_DUMP_VERSION,
            feature_names: data.feature_names().to_vec(),
            label_names: data.label_names().to_vec(),
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let dump: ModelDump = serde_json::from_str(text)?;
        if dump.format_version != MODEL_DUMP_VERSION {
            return Err(Box::new(ClassifierError::DumpVersion(dump.format_version)));
        }
        Ok(dump)
    }
}
