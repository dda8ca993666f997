//! Histogram gradient boosting with a softmax cross-entropy objective.
//!
//! Each stage fits one regression tree per class to the first and second
//! derivatives of the loss, grown leaf-wise (largest gain first). Leaf values
//! are the Newton step `-G / (H + lambda)`; the learning rate scales each
//! tree's output at prediction time.

use serde::{Deserialize, Serialize};

use super::goss::{goss_sample, validate_goss};
use super::histogram::{BinMapper, BinStats, BinnedData, Histogram};
use crate::encoding::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::learners::tree::{argmax, check_training_input, GAIN_TIE_EPS};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: Option<usize>,
    pub num_leaves: usize,
    pub min_data_in_leaf: usize,
    #[serde(alias = "lambda")]
    pub leaf_l2: f64,
    pub n_bins: usize,
    /// GOSS fraction `a` kept by gradient size.
    pub goss_top_fraction: f64,
    /// GOSS fraction `b` sampled from the remainder.
    pub goss_other_fraction: f64,
    pub efb: bool,
    pub efb_max_conflict: usize,
    pub seed: u64,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: None,
            num_leaves: 31,
            min_data_in_leaf: 20,
            leaf_l2: 1.0,
            n_bins: 255,
            goss_top_fraction: 0.0,
            goss_other_fraction: 1.0,
            efb: false,
            efb_max_conflict: 0,
            seed: 0,
        }
    }
}

impl GbmParams {
    pub fn paper() -> Self {
        Self {
            n_estimators: 300,
            learning_rate: 0.01,
            max_depth: Some(10),
            num_leaves: 63,
            min_data_in_leaf: 20,
            seed: 42,
            ..Self::default()
        }
    }

    pub fn goss_enabled(&self) -> bool {
        !(self.goss_top_fraction == 0.0 && self.goss_other_fraction == 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.num_leaves < 2 {
            return Err(Error::InvalidParameter("num_leaves must be >= 2".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
        }
        if self.min_data_in_leaf == 0 {
            return Err(Error::InvalidParameter(
                "min_data_in_leaf must be >= 1".into(),
            ));
        }
        if !(self.leaf_l2 >= 0.0 && self.leaf_l2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "leaf_l2 must be >= 0, got {}",
                self.leaf_l2
            )));
        }
        validate_goss(self.goss_top_fraction, self.goss_other_fraction)
    }
}

/// Newton leaf value minimizing `G w + (H + lambda) w^2 / 2`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64> {
    let denom = h + lambda;
    if !(denom > 0.0) {
        return Err(Error::InvalidInput(format!(
            "leaf hessian plus lambda must be positive, got {denom}"
        )));
    }
    Ok(-g / denom)
}

/// Gain of splitting a leaf with totals `(gl + gr, hl + hr)`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                RegNode::Split {
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
                RegNode::Leaf { value } => return *value,
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, RegNode::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub learning_rate: f64,
    /// Initial per-class scores (log class priors).
    pub prior_scores: Vec<f64>,
    /// One tree per class per stage.
    pub stages: Vec<Vec<RegTree>>,
    /// Total split gain per feature.
    pub importance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbmTrace {
    /// Mean training cross-entropy before stage 1 and after every stage.
    pub train_log_loss: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    bin: usize,
    gain: f64,
}

fn better(c: &Candidate, best: &Option<Candidate>) -> bool {
    match best {
        None => true,
        Some(b) => {
            c.gain > b.gain + GAIN_TIE_EPS
                || (c.gain >= b.gain - GAIN_TIE_EPS && (c.feature, c.bin) < (b.feature, b.bin))
        }
    }
}

struct OpenLeaf {
    rows: Vec<usize>,
    hist: Histogram,
    total: BinStats,
    depth: usize,
    node: usize,
    best: Option<Candidate>,
}

struct TreeGrower<'a> {
    data: &'a BinnedData,
    mapper: &'a BinMapper,
    params: &'a GbmParams,
    grad: &'a [f64],
    hess: &'a [f64],
}

impl TreeGrower<'_> {
    fn totals(&self, rows: &[usize]) -> BinStats {
        rows.iter().fold(BinStats::default(), |acc, &r| {
            acc.plus(&BinStats {
                g: self.grad[r],
                h: self.hess[r],
                count: 1,
            })
        })
    }

    fn find_split(&self, hist: &Histogram, total: BinStats, depth: usize) -> Option<Candidate> {
        if self.params.max_depth.is_some_and(|d| depth >= d)
            || total.count < 2 * self.params.min_data_in_leaf
        {
            return None;
        }
        let lambda = self.params.leaf_l2;
        let min_leaf = self.params.min_data_in_leaf;
        let mut best = None;
        for f in 0..self.data.n_bins.len() {
            let nb = self.data.n_bins[f];
            if nb < 2 {
                continue;
            }
            let stats = self.data.feature_stats(hist, f, total);
            let mut left = BinStats::default();
            for (b, s) in stats.iter().enumerate().take(nb - 1) {
                left = left.plus(s);
                if left.count < min_leaf {
                    continue;
                }
                let right = total.minus(&left);
                if right.count < min_leaf {
                    break;
                }
                if left.h + lambda <= 0.0 || right.h + lambda <= 0.0 {
                    continue;
                }
                let c = Candidate {
                    feature: f,
                    bin: b,
                    gain: split_gain(left.g, left.h, right.g, right.h, lambda),
                };
                if better(&c, &best) {
                    best = Some(c);
                }
            }
        }
        best.filter(|b| b.gain > GAIN_TIE_EPS)
    }

    fn leaf_value(&self, total: BinStats) -> f64 {
        leaf_weight(total.g, total.h, self.params.leaf_l2).unwrap_or(0.0)
    }

    fn grow(&self, rows: Vec<usize>, importance: &mut [f64]) -> RegTree {
        let total = self.totals(&rows);
        let hist = self.data.build(&rows, self.grad, self.hess);
        let best = self.find_split(&hist, total, 0);
        let mut nodes = vec![RegNode::Leaf {
            value: self.leaf_value(total),
        }];
        let mut open = vec![OpenLeaf {
            rows,
            hist,
            total,
            depth: 0,
            node: 0,
            best,
        }];
        let mut n_leaves = 1;
        while n_leaves < self.params.num_leaves {
            // Largest gain first; ties go to the earliest-created leaf.
            let pick = open
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.best.map(|b| (i, b.gain)))
                .fold(None::<(usize, f64)>, |acc, (i, g)| match acc {
                    Some((_, bg)) if g <= bg + GAIN_TIE_EPS => acc,
                    _ => Some((i, g)),
                });
            let Some((idx, _)) = pick else { break };
            let leaf = open.swap_remove(idx);
            let split = leaf.best.expect("picked leaf has a split");
            let threshold = self.mapper.thresholds[split.feature][split.bin];
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = leaf
                .rows
                .iter()
                .partition(|&&r| self.feature_bin(split.feature, r) <= split.bin);
            importance[split.feature] += split.gain;

            let left_total = self.totals(&left_rows);
            let right_total = leaf.total.minus(&left_total);
            let (left_hist, right_hist) = if left_rows.len() <= right_rows.len() {
                let small = self.data.build(&left_rows, self.grad, self.hess);
                let large = leaf.hist.subtract(&small);
                (small, large)
            } else {
                let small = self.data.build(&right_rows, self.grad, self.hess);
                let large = leaf.hist.subtract(&small);
                (large, small)
            };
            let left_node = nodes.len();
            nodes.push(RegNode::Leaf {
                value: self.leaf_value(left_total),
            });
            nodes.push(RegNode::Leaf {
                value: self.leaf_value(right_total),
            });
            nodes[leaf.node] = RegNode::Split {
                feature: split.feature,
                threshold,
                left: left_node,
                right: left_node + 1,
            };
            let depth = leaf.depth + 1;
            let left_best = self.find_split(&left_hist, left_total, depth);
            let right_best = self.find_split(&right_hist, right_total, depth);
            open.push(OpenLeaf {
                rows: left_rows,
                hist: left_hist,
                total: left_total,
                depth,
                node: left_node,
                best: left_best,
            });
            open.push(OpenLeaf {
                rows: right_rows,
                hist: right_hist,
                total: right_total,
                depth,
                node: left_node + 1,
                best: right_best,
            });
            // Keep creation order so ties resolve to the older leaf.
            open.sort_by_key(|l| l.node);
            n_leaves += 1;
        }
        RegTree { nodes }
    }

    fn feature_bin(&self, feature: usize, row: usize) -> usize {
        self.data.bins[feature][row] as usize
    }
}

fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; scores.len()];
    softmax_into(scores, &mut out);
    out
}

/// Log class frequencies, with add-one smoothing when a class is absent.
pub fn prior_scores(y: &LabelVector) -> Vec<f64> {
    let counts = y.class_counts();
    let n = y.len() as f64;
    let k = y.n_classes() as f64;
    if counts.contains(&0) {
        counts
            .iter()
            .map(|&c| ((c as f64 + 1.0) / (n + k)).ln())
            .collect()
    } else {
        counts.iter().map(|&c| (c as f64 / n).ln()).collect()
    }
}

fn mean_log_loss(scores: &[f64], labels: &[usize], k: usize) -> f64 {
    let mut probs = vec![0.0; k];
    let total: f64 = scores
        .chunks(k)
        .zip(labels)
        .map(|(s, &y)| {
            softmax_into(s, &mut probs);
            -probs[y].max(f64::MIN_POSITIVE).ln()
        })
        .sum();
    total / labels.len() as f64
}

pub fn fit_gbm(x: &FeatureMatrix, y: &LabelVector, params: &GbmParams) -> Result<GbmModel> {
    fit_gbm_traced(x, y, params).map(|(m, _)| m)
}

pub fn fit_gbm_traced(
    x: &FeatureMatrix,
    y: &LabelVector,
    params: &GbmParams,
) -> Result<(GbmModel, GbmTrace)> {
    params.validate()?;
    check_training_input(x, y)?;
    let n = x.n_rows();
    let k = y.n_classes();
    if k < 2 {
        return Err(Error::InvalidInput(
            "boosting needs at least 2 classes".into(),
        ));
    }
    if params.min_data_in_leaf > n {
        return Err(Error::InvalidParameter(format!(
            "min_data_in_leaf {} exceeds the {n} training rows",
            params.min_data_in_leaf
        )));
    }
    let mapper = BinMapper::fit(x, params.n_bins)?;
    let data = BinnedData::new(x, &mapper, params.efb.then_some(params.efb_max_conflict));

    let prior = prior_scores(y);
    let labels = y.labels();
    let mut scores: Vec<f64> = (0..n).flat_map(|_| prior.iter().copied()).collect();
    let mut trace = GbmTrace {
        train_log_loss: vec![mean_log_loss(&scores, labels, k)],
    };
    let mut importance = vec![0.0; x.n_cols()];
    let mut stages = Vec::with_capacity(params.n_estimators);
    let mut rng = seeded(params.seed);
    let mut probs = vec![0.0; n * k];
    let mut grad = vec![vec![0.0; n]; k];
    let mut hess = vec![vec![0.0; n]; k];

    for _ in 0..params.n_estimators {
        for (s, p) in scores.chunks(k).zip(probs.chunks_mut(k)) {
            softmax_into(s, p);
        }
        for i in 0..n {
            for c in 0..k {
                let p = probs[i * k + c];
                grad[c][i] = p - if labels[i] == c { 1.0 } else { 0.0 };
                hess[c][i] = p * (1.0 - p);
            }
        }
        let rows: Vec<usize> = if params.goss_enabled() {
            let magnitude: Vec<f64> = (0..n)
                .map(|i| (0..k).map(|c| grad[c][i].abs()).sum())
                .collect();
            let (rows, weights) = goss_sample(
                &magnitude,
                params.goss_top_fraction,
                params.goss_other_fraction,
                &mut rng,
            )?;
            for (&r, &w) in rows.iter().zip(&weights) {
                for c in 0..k {
                    grad[c][r] *= w;
                    hess[c][r] *= w;
                }
            }
            rows
        } else {
            (0..n).collect()
        };

        let mut stage = Vec::with_capacity(k);
        for c in 0..k {
            let grower = TreeGrower {
                data: &data,
                mapper: &mapper,
                params,
                grad: &grad[c],
                hess: &hess[c],
            };
            stage.push(grower.grow(rows.clone(), &mut importance));
        }
        if params.learning_rate > 0.0 {
            for (i, row) in x.rows().enumerate() {
                for (c, tree) in stage.iter().enumerate() {
                    scores[i * k + c] += params.learning_rate * tree.predict(row);
                }
            }
        }
        trace.train_log_loss.push(mean_log_loss(&scores, labels, k));
        stages.push(stage);
    }

    Ok((
        GbmModel {
            n_features: x.n_cols(),
            n_classes: k,
            learning_rate: params.learning_rate,
            prior_scores: prior,
            stages,
            importance,
        },
        trace,
    ))
}

impl GbmModel {
    pub fn raw_scores(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features {
            return Err(Error::shape(
                format!("{} features", self.n_features),
                row.len(),
            ));
        }
        let mut scores = self.prior_scores.clone();
        for stage in &self.stages {
            for (s, tree) in scores.iter_mut().zip(stage) {
                *s += self.learning_rate * tree.predict(row);
            }
        }
        Ok(scores)
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.raw_scores(row)?))
    }

    pub fn predict_class(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax(&self.raw_scores(row)?))
    }
}

pub fn gbm_predict(model: &GbmModel, row: &[f64]) -> Result<(usize, Vec<f64>)> {
    let proba = model.predict_proba(row)?;
    Ok((model.predict_class(row)?, proba))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, k: usize) -> (FeatureMatrix, LabelVector) {
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % k;
            let jitter = ((i * 7919) % 97) as f64 / 97.0;
            rows.push(vec![
                c as f64 + jitter,
                ((i * 31) % 13) as f64,
                jitter * 3.0,
            ]);
            labels.push(c);
        }
        (
            FeatureMatrix::from_rows(&rows).unwrap(),
            LabelVector::new(labels, k).unwrap(),
        )
    }

    #[test]
    fn leaf_weight_examples() {
        assert_eq!(leaf_weight(2.0, 4.0, 1.0).unwrap(), -0.4);
        assert_eq!(leaf_weight(0.0, 4.0, 1.0).unwrap(), 0.0);
        assert!(leaf_weight(1.0, 1.0, 1e9).unwrap().abs() < 1e-8);
        assert!(leaf_weight(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn zero_stages_is_the_prior() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = LabelVector::new(vec![0, 0, 0, 1], 2).unwrap();
        let params = GbmParams {
            n_estimators: 0,
            min_data_in_leaf: 1,
            ..GbmParams::default()
        };
        let model = fit_gbm(&x, &y, &params).unwrap();
        let (class, proba) = gbm_predict(&model, &[10.0]).unwrap();
        assert_eq!(class, 0);
        assert!((proba[0] - 0.75).abs() < 1e-12 && (proba[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_predicts_prior_argmax() {
        let (x, y) = blobs(60, 3);
        let params = GbmParams {
            n_estimators: 5,
            learning_rate: 0.0,
            min_data_in_leaf: 5,
            ..GbmParams::default()
        };
        let model = fit_gbm(&x, &y, &params).unwrap();
        let prior = argmax(&model.prior_scores);
        for row in x.rows() {
            assert_eq!(model.predict_class(row).unwrap(), prior);
        }
    }

    #[test]
    fn training_loss_decreases_and_fits_blobs() {
        let (x, y) = blobs(300, 3);
        let params = GbmParams {
            n_estimators: 30,
            min_data_in_leaf: 5,
            ..GbmParams::default()
        };
        let (model, trace) = fit_gbm_traced(&x, &y, &params).unwrap();
        assert!(trace.train_log_loss.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        let hits = x
            .rows()
            .zip(y.labels())
            .filter(|(r, l)| model.predict_class(r).unwrap() == **l)
            .count();
        assert!(hits as f64 / 300.0 > 0.95);
        assert!(model.importance[0] > model.importance[1]);
    }

    #[test]
    fn leaf_cap_and_depth_cap() {
        let (x, y) = blobs(200, 4);
        let params = GbmParams {
            n_estimators: 2,
            num_leaves: 3,
            min_data_in_leaf: 2,
            ..GbmParams::default()
        };
        let model = fit_gbm(&x, &y, &params).unwrap();
        assert!(model.stages.iter().flatten().all(|t| t.n_leaves() <= 3));
        let params = GbmParams {
            max_depth: Some(1),
            num_leaves: 31,
            ..params
        };
        let model = fit_gbm(&x, &y, &params).unwrap();
        assert!(model.stages.iter().flatten().all(|t| t.n_leaves() <= 2));
    }

    #[test]
    fn goss_and_efb_runs_are_reproducible() {
        let (x, y) = blobs(200, 3);
        let params = GbmParams {
            n_estimators: 5,
            min_data_in_leaf: 3,
            goss_top_fraction: 0.2,
            goss_other_fraction: 0.3,
            efb: true,
            seed: 11,
            ..GbmParams::default()
        };
        let a = fit_gbm(&x, &y, &params).unwrap();
        let b = fit_gbm(&x, &y, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn argument_errors() {
        let (x, y) = blobs(10, 2);
        let too_many = GbmParams {
            min_data_in_leaf: 11,
            ..GbmParams::default()
        };
        assert!(fit_gbm(&x, &y, &too_many).is_err());
        let bad_goss = GbmParams {
            goss_top_fraction: 0.7,
            goss_other_fraction: 0.5,
            min_data_in_leaf: 1,
            ..GbmParams::default()
        };
        assert!(fit_gbm(&x, &y, &bad_goss).is_err());
        let model = fit_gbm(
            &x,
            &y,
            &GbmParams {
                n_estimators: 1,
                min_data_in_leaf: 1,
                ..GbmParams::default()
            },
        )
        .unwrap();
        assert!(gbm_predict(&model, &[0.0]).is_err());
    }

    #[test]
    fn equal_scores_give_uniform_probabilities() {
        let p = softmax(&[2.0, 2.0, 2.0, 2.0]);
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }
}
