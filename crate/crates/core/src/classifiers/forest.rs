use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, validate_params, DecisionTreeModel, RandomSubset, TreeParams};
use super::{argmax_count, ClassifierError, Result};
use crate::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` means `floor(sqrt(n_features))`, at least 1.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            features_per_split: None,
            bootstrap: true,
            tree: TreeParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<DecisionTreeModel>,
    features_per_split: usize,
    bootstrap: bool,
    master_seed: u64,
}

/// Generator for tree `index`: the master seed's ChaCha stream number `index`.
pub fn tree_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

pub fn fit_random_forest(data: &Dataset, params: &ForestParams) -> Result<ForestModel> {
    let n = data.n_rows();
    if n == 0 {
        return Err(ClassifierError::Empty);
    }
    validate_params(&params.tree)?;
    if params.n_trees == 0 {
        return Err(ClassifierError::Param("n_trees must be at least 1".into()));
    }
    let n_features = data.n_features();
    let features_per_split = params
        .features_per_split
        .unwrap_or_else(|| ((n_features as f64).sqrt().floor() as usize).max(1));
    if features_per_split == 0 || features_per_split > n_features {
        return Err(ClassifierError::Param(format!(
            "features_per_split {features_per_split} outside [1, {n_features}]"
        )));
    }
    let x = data.features().view();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|index| {
            let mut rng = tree_rng(params.seed, index);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(
                x,
                data.labels(),
                data.n_classes(),
                rows,
                params.tree,
                RandomSubset {
                    rng: &mut rng,
                    size: features_per_split,
                },
            )
        })
        .collect();
    Ok(ForestModel {
        trees,
        features_per_split,
        bootstrap: params.bootstrap,
        master_seed: params.seed,
    })
}

impl ForestModel {
    pub fn trees(&self) -> &[DecisionTreeModel] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.trees[0].n_classes()
    }

    pub fn features_per_split(&self) -> usize {
        self.features_per_split
    }

    pub fn bootstrap(&self) -> bool {
        self.bootstrap
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Majority vote over trees, ties to the lowest class code.
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes()];
        for tree in &self.trees {
            votes[tree.predict_row(row)] += 1;
        }
        argmax_count(&votes)
    }

    /// Mean of per-tree normalized importances, renormalized.
    pub fn feature_importances(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n_features()];
        for tree in &self.trees {
            for (m, s) in mean.iter_mut().zip(tree.feature_importances()) {
                *m += s;
            }
        }
        let total: f64 = mean.iter().sum();
        if total > 0.0 {
            mean.iter_mut().for_each(|m| *m /= total);
        }
        mean
    }
}
