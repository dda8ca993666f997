//! Seeded random hyperparameter search on a fixed validation split.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::encoding::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::evaluation::{confusion_matrix, metrics_report, Metric, MetricsReport};
use crate::model::{Classifier, ModelFamily, ModelParams};
use crate::rng::{derive_seed, seeded};

pub const DEFAULT_TRIALS: usize = 25;

/// A sampled or listed hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    Null,
}

impl ParamValue {
    pub fn to_json(&self) -> Value {
        match self {
            ParamValue::Bool(b) => Value::from(*b),
            ParamValue::Int(i) => Value::from(*i),
            ParamValue::Float(f) => Value::from(*f),
            ParamValue::Text(s) => Value::from(s.as_str()),
            ParamValue::Null => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Choice(Vec<ParamValue>),
    /// Inclusive integer range.
    IntUniform(i64, i64),
    /// Positive range sampled uniformly in log space.
    LogUniform(f64, f64),
}

impl Sampler {
    pub fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Sampler::Choice(values) => !values.is_empty(),
            Sampler::IntUniform(lo, hi) => lo <= hi,
            Sampler::LogUniform(lo, hi) => *lo > 0.0 && lo <= hi && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "search range for {name:?} is empty or invalid: {self:?}"
            )))
        }
    }

    pub fn sample(&self, rng: &mut crate::rng::Rng) -> ParamValue {
        match self {
            Sampler::Choice(values) => values[rng.random_range(0..values.len())].clone(),
            Sampler::IntUniform(lo, hi) => ParamValue::Int(rng.random_range(*lo..=*hi)),
            Sampler::LogUniform(lo, hi) => {
                if lo == hi {
                    return ParamValue::Float(*lo);
                }
                let v = rng.random_range(lo.ln()..=hi.ln()).exp();
                ParamValue::Float(v.clamp(*lo, *hi))
            }
        }
    }

    pub fn contains(&self, value: &ParamValue) -> bool {
        match (self, value) {
            (Sampler::Choice(values), v) => values.contains(v),
            (Sampler::IntUniform(lo, hi), ParamValue::Int(v)) => lo <= v && v <= hi,
            (Sampler::LogUniform(lo, hi), ParamValue::Float(v)) => lo <= v && v <= hi,
            _ => false,
        }
    }
}

/// Samplers keyed by (possibly dotted) parameter name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    pub params: BTreeMap<String, Sampler>,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::InvalidParameter(
                "search space has no parameters".into(),
            ));
        }
        self.params.iter().try_for_each(|(k, s)| s.validate(k))
    }

    /// Draws one value per parameter, in key order.
    pub fn sample(&self, rng: &mut crate::rng::Rng) -> BTreeMap<String, ParamValue> {
        self.params
            .iter()
            .map(|(k, s)| (k.clone(), s.sample(rng)))
            .collect()
    }

    pub fn default_for(family: ModelFamily) -> Self {
        use ParamValue::Text;
        use Sampler::*;
        let entries: Vec<(&str, Sampler)> = match family {
            ModelFamily::Logistic => vec![("C", LogUniform(1e-3, 1e2))],
            ModelFamily::DecisionTree => vec![
                (
                    "criterion",
                    Choice(vec![Text("entropy".into()), Text("gini".into())]),
                ),
                ("max_depth", IntUniform(2, 30)),
                ("min_samples_split", IntUniform(2, 20)),
                ("min_samples_leaf", IntUniform(1, 10)),
                (
                    "max_features",
                    Choice(vec![Text("sqrt".into()), Text("all".into())]),
                ),
            ],
            ModelFamily::RandomForest => vec![
                ("n_estimators", IntUniform(20, 120)),
                ("tree.max_depth", IntUniform(5, 30)),
                ("tree.min_samples_leaf", IntUniform(1, 5)),
                (
                    "tree.max_features",
                    Choice(vec![Text("sqrt".into()), Text("all".into())]),
                ),
            ],
            ModelFamily::AdaBoost => vec![
                ("n_estimators", IntUniform(20, 150)),
                ("learning_rate", LogUniform(0.01, 1.0)),
                ("base_max_depth", IntUniform(1, 4)),
            ],
            ModelFamily::Gbm => vec![
                ("n_estimators", IntUniform(50, 300)),
                ("learning_rate", LogUniform(0.01, 0.3)),
                ("num_leaves", IntUniform(8, 63)),
                ("max_depth", IntUniform(3, 12)),
                ("min_data_in_leaf", IntUniform(5, 50)),
            ],
        };
        Self {
            params: entries
                .into_iter()
                .map(|(k, s)| (k.to_string(), s))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    pub seed: u64,
    pub sampled: BTreeMap<String, ParamValue>,
    /// `None` when the trial failed.
    pub objective: Option<f64>,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub objective: Metric,
    pub best_index: usize,
    pub best_params: ModelParams,
    pub trials: Vec<TrialResult>,
}

impl SearchOutcome {
    pub fn best(&self) -> &TrialResult {
        &self.trials[self.best_index]
    }
}

pub struct SearchData<'a> {
    pub train_x: &'a FeatureMatrix,
    pub train_y: &'a LabelVector,
    pub valid_x: &'a FeatureMatrix,
    pub valid_y: &'a LabelVector,
}

pub fn trial_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

fn run_trial(
    base: &ModelParams,
    sampled: &BTreeMap<String, ParamValue>,
    data: &SearchData<'_>,
) -> Result<MetricsReport> {
    let overrides = sampled
        .iter()
        .map(|(k, v)| (k.clone(), v.to_json()))
        .collect();
    let params = base.with_overrides(&overrides)?;
    let model = params.fit(data.train_x, data.train_y)?;
    let pred = model.predict_batch(data.valid_x)?;
    metrics_report(&confusion_matrix(
        data.valid_y.labels(),
        &pred,
        data.valid_y.n_classes(),
    )?)
}

/// Evaluates `n_trials` sampled configurations layered over `base`.
/// The best trial maximizes the objective; ties keep the earliest.
pub fn random_search(
    base: &ModelParams,
    space: &SearchSpace,
    n_trials: usize,
    seed: u64,
    objective: Metric,
    data: &SearchData<'_>,
) -> Result<SearchOutcome> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("n_trials must be >= 1".into()));
    }
    space.validate()?;
    let mut trials = Vec::with_capacity(n_trials);
    let mut best: Option<(usize, f64)> = None;
    for index in 0..n_trials {
        let seed = trial_seed(seed, index);
        let sampled = space.sample(&mut seeded(seed));
        let trial = match run_trial(base, &sampled, data) {
            Ok(report) => {
                let value = report.metric(objective);
                if best.is_none_or(|(_, b)| value > b) {
                    best = Some((index, value));
                }
                TrialResult {
                    index,
                    seed,
                    sampled,
                    objective: Some(value),
                    report: Some(report),
                    error: None,
                }
            }
            Err(e) => {
                log::warn!("trial {index} failed: {e}");
                TrialResult {
                    index,
                    seed,
                    sampled,
                    objective: None,
                    report: None,
                    error: Some(e.to_string()),
                }
            }
        };
        trials.push(trial);
    }
    let Some((best_index, _)) = best else {
        return Err(Error::AllTrialsFailed(n_trials));
    };
    let overrides = trials[best_index]
        .sampled
        .iter()
        .map(|(k, v)| (k.clone(), v.to_json()))
        .collect();
    Ok(SearchOutcome {
        objective,
        best_index,
        best_params: base.with_overrides(&overrides)?,
        trials,
    })
}
