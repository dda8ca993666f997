//! Multiclass AdaBoost (stagewise additive modelling with the ln(K-1) term).

use serde::{Deserialize, Serialize};

use crate::encoding::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::learners::impurity::Criterion;
use crate::learners::tree::{
    argmax, check_training_input, grow_tree, MaxFeatures, TreeModel, TreeParams,
};

/// A stage's odds ratio is capped here, which bounds alpha when a stage is
/// perfect.
pub const MAX_STAGE_ODDS: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub base_max_depth: usize,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 50,
            learning_rate: 1.0,
            base_max_depth: 1,
        }
    }
}

impl AdaBoostParams {
    pub fn paper() -> Self {
        Self {
            n_estimators: 100,
            learning_rate: 0.1,
            base_max_depth: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidParameter("n_estimators must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.base_max_depth == 0 {
            return Err(Error::InvalidParameter(
                "base_max_depth must be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn base_tree(&self) -> TreeParams {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth: Some(self.base_max_depth),
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostStage {
    pub tree: TreeModel,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub stages: Vec<AdaBoostStage>,
    pub n_features: usize,
    pub n_classes: usize,
}

/// Sample weights in force when each kept stage was fitted, plus the
/// weighted error of that stage.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostTrace {
    pub sample_weights: Vec<Vec<f64>>,
    pub errors: Vec<f64>,
    /// Weights after the final reweighting.
    pub final_weights: Vec<f64>,
}

pub fn fit_adaboost(
    x: &FeatureMatrix,
    y: &LabelVector,
    params: &AdaBoostParams,
) -> Result<AdaBoostModel> {
    fit_adaboost_traced(x, y, params).map(|(m, _)| m)
}

pub fn fit_adaboost_traced(
    x: &FeatureMatrix,
    y: &LabelVector,
    params: &AdaBoostParams,
) -> Result<(AdaBoostModel, AdaBoostTrace)> {
    params.validate()?;
    check_training_input(x, y)?;
    if y.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Degenerate("degenerate one-class fit".into()));
    }
    let n = x.n_rows();
    let k = y.n_classes();
    let chance = 1.0 - 1.0 / k as f64;
    let tree_params = params.base_tree();
    let all_rows: Vec<usize> = (0..n).collect();

    let mut weights = vec![1.0 / n as f64; n];
    let mut stages = Vec::new();
    let mut trace = AdaBoostTrace {
        sample_weights: Vec::new(),
        errors: Vec::new(),
        final_weights: Vec::new(),
    };
    for _ in 0..params.n_estimators {
        let tree = grow_tree(x, y.labels(), k, &weights, all_rows.clone(), &tree_params);
        let mut missed = vec![false; n];
        let mut error = 0.0;
        for (i, row) in x.rows().enumerate() {
            if tree.predict_class(row)? != y.labels()[i] {
                missed[i] = true;
                error += weights[i];
            }
        }
        let total: f64 = weights.iter().sum();
        let error = error / total;
        if error >= chance - 1e-12 {
            break;
        }
        trace.sample_weights.push(weights.clone());
        trace.errors.push(error);
        let cap = params.learning_rate * MAX_STAGE_ODDS.ln();
        if error <= 0.0 {
            stages.push(AdaBoostStage { tree, alpha: cap });
            break;
        }
        let alpha = (params.learning_rate * (((1.0 - error) / error).ln() + ((k - 1) as f64).ln()))
            .min(cap);
        let boost = alpha.exp();
        for (w, m) in weights.iter_mut().zip(&missed) {
            if *m {
                *w *= boost;
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        stages.push(AdaBoostStage { tree, alpha });
    }
    if stages.is_empty() {
        return Err(Error::Degenerate("no stage better than chance".into()));
    }
    trace.final_weights = weights;
    Ok((
        AdaBoostModel {
            stages,
            n_features: x.n_cols(),
            n_classes: k,
        },
        trace,
    ))
}

impl AdaBoostModel {
    /// Per-class sums of the weights of stages voting for that class.
    pub fn votes(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut votes = vec![0.0; self.n_classes];
        for stage in &self.stages {
            votes[stage.tree.predict_class(row)?] += stage.alpha;
        }
        Ok(votes)
    }

    pub fn predict_class(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax(&self.votes(row)?))
    }

    /// Votes normalized by the total stage weight.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let votes = self.votes(row)?;
        let total: f64 = votes.iter().sum();
        Ok(votes.into_iter().map(|v| v / total).collect())
    }

    /// Stage-weighted mean of member importances.
    pub fn importance(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        let total: f64 = self.stages.iter().map(|s| s.alpha).sum();
        for stage in &self.stages {
            for (a, v) in acc.iter_mut().zip(&stage.tree.importance) {
                *a += stage.alpha / total * v;
            }
        }
        acc
    }
}

pub fn adaboost_predict(model: &AdaBoostModel, row: &[f64]) -> Result<usize> {
    model.predict_class(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::{fit_tree_weighted, TreeNode};

    fn stump_leaf(class: usize) -> TreeModel {
        let mut counts = vec![0.0; 3];
        counts[class] = 1.0;
        TreeModel {
            nodes: vec![TreeNode::Leaf {
                class_counts: counts,
                n_samples: 1,
                prediction: class,
            }],
            n_features: 1,
            n_classes: 3,
            importance: vec![0.0],
        }
    }

    fn model(stages: &[(usize, f64)]) -> AdaBoostModel {
        AdaBoostModel {
            stages: stages
                .iter()
                .map(|&(c, alpha)| AdaBoostStage {
                    tree: stump_leaf(c),
                    alpha,
                })
                .collect(),
            n_features: 1,
            n_classes: 3,
        }
    }

    #[test]
    fn weighted_vote() {
        assert_eq!(adaboost_predict(&model(&[(2, 0.5)]), &[0.0]).unwrap(), 2);
        assert_eq!(
            adaboost_predict(&model(&[(1, 0.8), (2, 0.3)]), &[0.0]).unwrap(),
            1
        );
        assert_eq!(
            adaboost_predict(&model(&[(2, 0.3), (1, 0.8)]), &[0.0]).unwrap(),
            1
        );
        assert_eq!(
            adaboost_predict(&model(&[(2, 1.0), (0, 1.0), (2, 1.0)]), &[0.0]).unwrap(),
            2
        );
        assert_eq!(
            adaboost_predict(&model(&[(2, 1.0), (1, 1.0)]), &[0.0]).unwrap(),
            1
        );
        assert!(adaboost_predict(&model(&[(0, 1.0)]), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn chance_level_first_stage_is_an_error() {
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let y = LabelVector::new(vec![0, 1, 0, 1], 2).unwrap();
        let err = fit_adaboost(&x, &y, &AdaBoostParams::default()).unwrap_err();
        assert!(err.to_string().contains("no stage better than chance"));
    }

    #[test]
    fn first_stage_is_a_uniform_weighted_tree() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let labels = vec![0, 0, 1, 0, 1, 1, 2, 1, 2, 2];
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let y = LabelVector::new(labels, 3).unwrap();
        let params = AdaBoostParams::paper();
        let boosted = fit_adaboost(&x, &y, &params).unwrap();
        let w = vec![0.1; 10];
        let plain = fit_tree_weighted(&x, &y, Some(&w), &params.base_tree()).unwrap();
        assert_eq!(boosted.stages[0].tree, plain);
    }

    #[test]
    fn perfect_stage_is_kept_with_capped_alpha() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let y = LabelVector::new(vec![0, 1], 2).unwrap();
        let model = fit_adaboost(&x, &y, &AdaBoostParams::paper()).unwrap();
        assert_eq!(model.stages.len(), 1);
        assert!((model.stages[0].alpha - 0.1 * 1e12_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn one_class_labels_rejected() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let y = LabelVector::new(vec![1, 1], 2).unwrap();
        assert!(fit_adaboost(&x, &y, &AdaBoostParams::default()).is_err());
    }
}
