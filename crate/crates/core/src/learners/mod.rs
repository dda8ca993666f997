//! Base classifiers: impurity measures, greedy decision trees and
//! one-vs-rest logistic regression.

pub mod impurity;
pub mod logistic;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use impurity::{entropy, gini, information_gain, Criterion};
pub use logistic::{fit_logistic, logistic_predict_proba, LogisticModel, LogisticParams};
pub use tree::{
    best_split, fit_tree, tree_predict, MaxFeatures, SplitCandidate, TreeModel, TreeNode,
    TreeParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    /// Scores summing to 1, highest first; ties keep feature order.
    pub scores: Vec<FeatureScore>,
    /// Set when the model never split, so every score is 0.
    pub all_zero: bool,
}

impl FeatureImportance {
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.scores.iter().position(|s| s.name == name)
    }

    pub fn top(&self, k: usize) -> Vec<&str> {
        self.scores
            .iter()
            .take(k)
            .map(|s| s.name.as_str())
            .collect()
    }
}

/// Normalizes accumulated split gains into a descending importance table.
/// Ensembles pass one vector per member; members are averaged first.
pub fn feature_importance(members: &[&[f64]], names: &[String]) -> Result<FeatureImportance> {
    let d = names.len();
    if members.is_empty() {
        return Err(Error::InvalidInput("no importance vectors".into()));
    }
    if let Some(bad) = members.iter().find(|m| m.len() != d) {
        return Err(Error::shape(format!("{d} importances"), bad.len()));
    }
    let mut avg = vec![0.0; d];
    for m in members {
        for (a, v) in avg.iter_mut().zip(m.iter()) {
            *a += v.max(0.0);
        }
    }
    avg.iter_mut().for_each(|a| *a /= members.len() as f64);
    let total: f64 = avg.iter().sum();
    let all_zero = total <= 0.0;
    let mut scores: Vec<FeatureScore> = names
        .iter()
        .zip(&avg)
        .map(|(name, a)| FeatureScore {
            name: name.clone(),
            score: if all_zero { 0.0 } else { a / total },
        })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(FeatureImportance { scores, all_zero })
}
