//! Bagged decision trees with per-split feature subsampling.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::encoding::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::learners::impurity::Criterion;
use crate::learners::tree::{check_training_input, grow_tree, MaxFeatures, TreeModel, TreeParams};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// Member-tree settings; the tree seed is replaced per member.
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            tree: TreeParams {
                criterion: Criterion::Gini,
                max_features: MaxFeatures::Sqrt,
                ..TreeParams::default()
            },
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn paper() -> Self {
        Self {
            n_estimators: 200,
            tree: TreeParams {
                criterion: Criterion::Gini,
                max_depth: Some(30),
                min_samples_split: 2,
                min_samples_leaf: 1,
                max_features: MaxFeatures::Sqrt,
                seed: 42,
            },
            bootstrap: true,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidParameter("n_estimators must be >= 1".into()));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub n_features: usize,
    pub n_classes: usize,
}

pub fn fit_forest(
    x: &FeatureMatrix,
    y: &LabelVector,
    params: &ForestParams,
) -> Result<ForestModel> {
    params.validate()?;
    check_training_input(x, y)?;
    let n = x.n_rows();
    let weights = vec![1.0; n];
    let trees = (0..params.n_estimators)
        .map(|i| {
            let member_seed = derive_seed(params.seed, i as u64);
            let rows = if params.bootstrap {
                let mut rng = seeded(derive_seed(member_seed, u64::MAX));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let tree_params = TreeParams {
                seed: member_seed,
                ..params.tree.clone()
            };
            grow_tree(x, y.labels(), y.n_classes(), &weights, rows, &tree_params)
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_features: x.n_cols(),
        n_classes: y.n_classes(),
    })
}

/// Index of the largest count; ties go to the smallest index.
pub(crate) fn vote_winner(votes: &[f64]) -> usize {
    crate::learners::tree::argmax(votes)
}

impl ForestModel {
    pub fn votes(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut votes = vec![0.0; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict_class(row)?] += 1.0;
        }
        Ok(votes)
    }

    pub fn predict_class(&self, row: &[f64]) -> Result<usize> {
        Ok(vote_winner(&self.votes(row)?))
    }

    /// Vote fractions.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let votes = self.votes(row)?;
        let total = self.trees.len() as f64;
        Ok(votes.into_iter().map(|v| v / total).collect())
    }

    pub fn importance(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for tree in &self.trees {
            for (a, v) in acc.iter_mut().zip(&tree.importance) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= self.trees.len() as f64);
        acc
    }
}

pub fn forest_predict(model: &ForestModel, row: &[f64]) -> Result<usize> {
    model.predict_class(row)
}
