//! Greedy binary classification trees with axis-aligned threshold splits.

use serde::{Deserialize, Serialize};

use super::impurity::{impurity_of_counts, Criterion};
use crate::encoding::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

/// Gains closer than this are treated as ties, so the earlier candidate wins.
pub(crate) const GAIN_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    All,
    /// `floor(sqrt(d))`, at least 1.
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1).min(d),
            MaxFeatures::Count(k) => k.min(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::Entropy,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            seed: 0,
        }
    }
}

impl TreeParams {
    /// Published decision-tree configuration (`max_features: auto` read as sqrt).
    pub fn paper() -> Self {
        Self {
            criterion: Criterion::Entropy,
            max_depth: Some(20),
            min_samples_split: 10,
            min_samples_leaf: 5,
            max_features: MaxFeatures::Sqrt,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidParameter(
                "min_samples_leaf must be >= 1".into(),
            ));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter(
                "min_samples_split must be >= 2".into(),
            ));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(Error::InvalidParameter(
                "max_features count must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Per-class sample weight reaching the leaf.
        class_counts: Vec<f64>,
        n_samples: usize,
        prediction: usize,
    },
}

/// Fitted tree stored as a preorder node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
    pub n_classes: usize,
    /// Node-weight-scaled impurity decrease summed per feature.
    pub importance: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub n_left: usize,
    pub n_right: usize,
}

/// Training data for a split search, with per-row weights.
#[derive(Debug, Clone, Copy)]
pub struct NodeData<'a> {
    pub x: &'a FeatureMatrix,
    pub y: &'a [usize],
    pub weights: &'a [f64],
    pub n_classes: usize,
}

impl NodeData<'_> {
    fn class_counts(&self, rows: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += self.weights[r];
        }
        counts
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn candidate_features(d: usize, max_features: MaxFeatures, rng: &mut Rng) -> Vec<usize> {
    let k = max_features.resolve(d);
    if k >= d {
        return (0..d).collect();
    }
    let mut picked = rand::seq::index::sample(rng, d, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Best threshold split of `rows`, or `None` when no split has positive
/// gain with both children holding at least `min_samples_leaf` rows.
///
/// Thresholds are midpoints between consecutive distinct values. Ties go to
/// the smallest feature index, then the smallest threshold.
pub fn best_split(
    data: &NodeData<'_>,
    rows: &[usize],
    params: &TreeParams,
    rng: &mut Rng,
) -> Option<SplitCandidate> {
    let m = rows.len();
    if m < params.min_samples_split.max(2) {
        return None;
    }
    let features = candidate_features(data.x.n_cols(), params.max_features, rng);
    let parent = data.class_counts(rows);
    let total: f64 = parent.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let parent_impurity = impurity_of_counts(&parent, params.criterion);
    let min_leaf = params.min_samples_leaf;

    let mut best: Option<SplitCandidate> = None;
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(m);
    let mut left = vec![0.0; data.n_classes];
    let mut right = vec![0.0; data.n_classes];
    for f in features {
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (data.x.get(r, f), r)));
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if sorted[0].0 == sorted[m - 1].0 {
            continue;
        }
        left.iter_mut().for_each(|c| *c = 0.0);
        let mut left_weight = 0.0;
        for i in 0..m - 1 {
            let (value, r) = sorted[i];
            let w = data.weights[r];
            left[data.y[r]] += w;
            left_weight += w;
            let next = sorted[i + 1].0;
            if value == next {
                continue;
            }
            let n_left = i + 1;
            if n_left < min_leaf || m - n_left < min_leaf {
                continue;
            }
            for ((rc, pc), lc) in right.iter_mut().zip(&parent).zip(&left) {
                *rc = (pc - lc).max(0.0);
            }
            let right_weight = (total - left_weight).max(0.0);
            let gain = parent_impurity
                - (left_weight / total) * impurity_of_counts(&left, params.criterion)
                - (right_weight / total) * impurity_of_counts(&right, params.criterion);
            if best.is_none_or(|b| gain > b.gain + GAIN_TIE_EPS) {
                let mut threshold = 0.5 * (value + next);
                if threshold >= next {
                    threshold = value;
                }
                best = Some(SplitCandidate {
                    feature: f,
                    threshold,
                    gain,
                    n_left,
                    n_right: m - n_left,
                });
            }
        }
    }
    best.filter(|b| b.gain > GAIN_TIE_EPS)
}

/// Grows a tree on `rows` (duplicates allowed, as in bootstrap samples).
pub(crate) fn grow_tree(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    weights: &[f64],
    rows: Vec<usize>,
    params: &TreeParams,
) -> TreeModel {
    let data = NodeData {
        x,
        y,
        weights,
        n_classes,
    };
    let mut rng = seeded(params.seed);
    let total_weight: f64 = rows.iter().map(|&r| weights[r]).sum();
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut importance = vec![0.0; x.n_cols()];

    // (rows, depth, parent whose `right` should point at this node)
    let mut stack: Vec<(Vec<usize>, usize, Option<usize>)> = vec![(rows, 0, None)];
    while let Some((rows, depth, parent)) = stack.pop() {
        let idx = nodes.len();
        if let Some(TreeNode::Split { right, .. }) = parent.map(|p| &mut nodes[p]) {
            *right = idx;
        }
        let counts = data.class_counts(&rows);
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_ok = params.max_depth.is_none_or(|d| depth < d);
        let split = if pure || !depth_ok {
            None
        } else {
            best_split(&data, &rows, params, &mut rng)
        };
        match split {
            Some(s) => {
                let node_weight: f64 = counts.iter().sum();
                if total_weight > 0.0 {
                    importance[s.feature] += node_weight / total_weight * s.gain;
                }
                let (left, right): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&r| x.get(r, s.feature) <= s.threshold);
                nodes.push(TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: idx + 1,
                    right: usize::MAX,
                });
                stack.push((right, depth + 1, Some(idx)));
                stack.push((left, depth + 1, None));
            }
            None => nodes.push(TreeNode::Leaf {
                prediction: argmax(&counts),
                class_counts: counts,
                n_samples: rows.len(),
            }),
        }
    }
    TreeModel {
        nodes,
        n_features: x.n_cols(),
        n_classes,
        importance,
    }
}

pub(crate) fn check_training_input(x: &FeatureMatrix, y: &LabelVector) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::InvalidInput("cannot fit on an empty dataset".into()));
    }
    if x.n_rows() != y.len() {
        return Err(Error::shape(format!("{} labels", x.n_rows()), y.len()));
    }
    Ok(())
}

pub fn fit_tree(x: &FeatureMatrix, y: &LabelVector, params: &TreeParams) -> Result<TreeModel> {
    fit_tree_weighted(x, y, None, params)
}

/// Fits with optional per-row weights (uniform when `None`).
pub fn fit_tree_weighted(
    x: &FeatureMatrix,
    y: &LabelVector,
    weights: Option<&[f64]>,
    params: &TreeParams,
) -> Result<TreeModel> {
    params.validate()?;
    check_training_input(x, y)?;
    let uniform;
    let weights = match weights {
        Some(w) => {
            if w.len() != x.n_rows() {
                return Err(Error::shape(format!("{} weights", x.n_rows()), w.len()));
            }
            if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "sample weights must be finite and non-negative".into(),
                ));
            }
            w
        }
        None => {
            uniform = vec![1.0; x.n_rows()];
            &uniform
        }
    };
    Ok(grow_tree(
        x,
        y.labels(),
        y.n_classes(),
        weights,
        (0..x.n_rows()).collect(),
        params,
    ))
}

impl TreeModel {
    fn leaf_for(&self, row: &[f64]) -> Result<&TreeNode> {
        if row.len() != self.n_features {
            return Err(Error::shape(
                format!("{} features", self.n_features),
                row.len(),
            ));
        }
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                leaf => return Ok(leaf),
            }
        }
    }

    pub fn predict_class(&self, row: &[f64]) -> Result<usize> {
        match self.leaf_for(row)? {
            TreeNode::Leaf { prediction, .. } => Ok(*prediction),
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        match self.leaf_for(row)? {
            TreeNode::Leaf { class_counts, .. } => {
                let total: f64 = class_counts.iter().sum();
                if total > 0.0 {
                    Ok(class_counts.iter().map(|c| c / total).collect())
                } else {
                    Ok(vec![1.0 / self.n_classes as f64; self.n_classes])
                }
            }
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize) -> usize {
            match &nodes[idx] {
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

pub fn tree_predict(model: &TreeModel, row: &[f64]) -> Result<(usize, Vec<f64>)> {
    Ok((model.predict_class(row)?, model.predict_proba(row)?))
}
