//! One prediction contract over every fitted model family.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::encoding::{FeatureMatrix, LabelVector};
use crate::ensembles::{
    fit_adaboost, fit_forest, fit_gbm, AdaBoostModel, AdaBoostParams, ForestModel, ForestParams,
    GbmModel, GbmParams,
};
use crate::error::{Error, Result};
use crate::learners::{
    fit_logistic, fit_tree, LogisticModel, LogisticParams, TreeModel, TreeParams,
};

pub trait Classifier {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>>;

    fn predict(&self, row: &[f64]) -> Result<usize> {
        let proba = self.predict_proba(row)?;
        Ok(crate::learners::tree::argmax(&proba))
    }

    fn predict_batch(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        x.rows().map(|r| self.predict(r)).collect()
    }
}

impl Classifier for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        TreeModel::predict_proba(self, row)
    }
    fn predict(&self, row: &[f64]) -> Result<usize> {
        self.predict_class(row)
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        ForestModel::predict_proba(self, row)
    }
    fn predict(&self, row: &[f64]) -> Result<usize> {
        self.predict_class(row)
    }
}

impl Classifier for AdaBoostModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        AdaBoostModel::predict_proba(self, row)
    }
    fn predict(&self, row: &[f64]) -> Result<usize> {
        self.predict_class(row)
    }
}

impl Classifier for GbmModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        GbmModel::predict_proba(self, row)
    }
    fn predict(&self, row: &[f64]) -> Result<usize> {
        self.predict_class(row)
    }
}

impl Classifier for LogisticModel {
    fn n_features(&self) -> usize {
        LogisticModel::n_features(self)
    }
    fn n_classes(&self) -> usize {
        LogisticModel::n_classes(self)
    }
    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        LogisticModel::predict_proba(self, row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Logistic,
    DecisionTree,
    RandomForest,
    #[serde(rename = "adaboost", alias = "ada_boost")]
    AdaBoost,
    #[serde(alias = "lightgbm")]
    Gbm,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] = [
        ModelFamily::Logistic,
        ModelFamily::DecisionTree,
        ModelFamily::RandomForest,
        ModelFamily::AdaBoost,
        ModelFamily::Gbm,
    ];

    /// Identifier used in configs and model files.
    pub fn key(self) -> &'static str {
        match self {
            ModelFamily::Logistic => "logistic",
            ModelFamily::DecisionTree => "decision_tree",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::AdaBoost => "adaboost",
            ModelFamily::Gbm => "gbm",
        }
    }

    /// Row label in the metrics table.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelFamily::Logistic => "Logistic Regression",
            ModelFamily::DecisionTree => "Decision Tree",
            ModelFamily::RandomForest => "Random Forest",
            ModelFamily::AdaBoost => "AdaBoost",
            ModelFamily::Gbm => "Gradient Boosting",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_ascii_lowercase()))
            .map_err(|_| Error::UnknownModelType(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ModelParams {
    Logistic(LogisticParams),
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    #[serde(rename = "adaboost")]
    AdaBoost(AdaBoostParams),
    Gbm(GbmParams),
}

impl ModelParams {
    pub fn paper(family: ModelFamily) -> Self {
        match family {
            ModelFamily::Logistic => ModelParams::Logistic(LogisticParams::paper()),
            ModelFamily::DecisionTree => ModelParams::DecisionTree(TreeParams::paper()),
            ModelFamily::RandomForest => ModelParams::RandomForest(ForestParams::paper()),
            ModelFamily::AdaBoost => ModelParams::AdaBoost(AdaBoostParams::paper()),
            ModelFamily::Gbm => ModelParams::Gbm(GbmParams::paper()),
        }
    }

    pub fn default_for(family: ModelFamily) -> Self {
        match family {
            ModelFamily::Logistic => ModelParams::Logistic(LogisticParams::default()),
            ModelFamily::DecisionTree => ModelParams::DecisionTree(TreeParams::default()),
            ModelFamily::RandomForest => ModelParams::RandomForest(ForestParams::default()),
            ModelFamily::AdaBoost => ModelParams::AdaBoost(AdaBoostParams::default()),
            ModelFamily::Gbm => ModelParams::Gbm(GbmParams::default()),
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            ModelParams::Logistic(_) => ModelFamily::Logistic,
            ModelParams::DecisionTree(_) => ModelFamily::DecisionTree,
            ModelParams::RandomForest(_) => ModelFamily::RandomForest,
            ModelParams::AdaBoost(_) => ModelFamily::AdaBoost,
            ModelParams::Gbm(_) => ModelFamily::Gbm,
        }
    }

    /// The family's own parameter object as JSON.
    pub fn params_json(&self) -> Result<Value> {
        let tagged = serde_json::to_value(self)?;
        Ok(tagged.get("params").cloned().unwrap_or(Value::Null))
    }

    pub fn from_family_json(family: ModelFamily, params: Value) -> Result<Self> {
        let tagged = serde_json::json!({ "family": family.key(), "params": params });
        serde_json::from_value(tagged)
            .map_err(|e| Error::InvalidParameter(format!("{} parameters: {e}", family.key())))
    }

    /// Returns a copy with the given fields replaced. Keys may be dotted to
    /// reach nested fields (`tree.max_depth`); unknown keys are rejected.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, Value>) -> Result<Self> {
        let mut json = self.params_json()?;
        for (key, value) in overrides {
            let mut slot = &mut json;
            for part in key.split('.') {
                slot = slot
                    .as_object_mut()
                    .and_then(|o| o.get_mut(part))
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "unknown {} parameter {key:?}",
                            self.family()
                        ))
                    })?;
            }
            *slot = value.clone();
        }
        let out = Self::from_family_json(self.family(), json)?;
        out.validate()?;
        Ok(out)
    }

    /// Same parameters with the training seed replaced. Families that train
    /// deterministically are returned unchanged.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelParams::DecisionTree(p) => p.seed = seed,
            ModelParams::RandomForest(p) => p.seed = seed,
            ModelParams::Gbm(p) => p.seed = seed,
            ModelParams::Logistic(_) | ModelParams::AdaBoost(_) => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Logistic(p) => p.validate(),
            ModelParams::DecisionTree(p) => p.validate(),
            ModelParams::RandomForest(p) => p.validate(),
            ModelParams::AdaBoost(p) => p.validate(),
            ModelParams::Gbm(p) => p.validate(),
        }
    }

    pub fn fit(&self, x: &FeatureMatrix, y: &LabelVector) -> Result<Model> {
        Ok(match self {
            ModelParams::Logistic(p) => Model::Logistic(fit_logistic(x, y, p)?),
            ModelParams::DecisionTree(p) => Model::Tree(fit_tree(x, y, p)?),
            ModelParams::RandomForest(p) => Model::Forest(fit_forest(x, y, p)?),
            ModelParams::AdaBoost(p) => Model::AdaBoost(fit_adaboost(x, y, p)?),
            ModelParams::Gbm(p) => Model::Gbm(fit_gbm(x, y, p)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Logistic(LogisticModel),
    Tree(TreeModel),
    Forest(ForestModel),
    AdaBoost(AdaBoostModel),
    Gbm(GbmModel),
}

impl Model {
    pub fn family(&self) -> ModelFamily {
        match self {
            Model::Logistic(_) => ModelFamily::Logistic,
            Model::Tree(_) => ModelFamily::DecisionTree,
            Model::Forest(_) => ModelFamily::RandomForest,
            Model::AdaBoost(_) => ModelFamily::AdaBoost,
            Model::Gbm(_) => ModelFamily::Gbm,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Logistic(m) => m,
            Model::Tree(m) => m,
            Model::Forest(m) => m,
            Model::AdaBoost(m) => m,
            Model::Gbm(m) => m,
        }
    }

    /// Raw split-gain accumulators; `None` for models without splits.
    pub fn raw_importance(&self) -> Option<Vec<f64>> {
        match self {
            Model::Logistic(_) => None,
            Model::Tree(m) => Some(m.importance.clone()),
            Model::Forest(m) => Some(m.importance()),
            Model::AdaBoost(m) => Some(m.importance()),
            Model::Gbm(m) => Some(m.importance.clone()),
        }
    }

    /// Family payload as JSON (without the enum tag).
    pub fn payload_json(&self) -> Result<Value> {
        Ok(match self {
            Model::Logistic(m) => serde_json::to_value(m)?,
            Model::Tree(m) => serde_json::to_value(m)?,
            Model::Forest(m) => serde_json::to_value(m)?,
            Model::AdaBoost(m) => serde_json::to_value(m)?,
            Model::Gbm(m) => serde_json::to_value(m)?,
        })
    }

    pub fn from_payload_json(family: ModelFamily, payload: Value) -> Result<Self> {
        Ok(match family {
            ModelFamily::Logistic => Model::Logistic(serde_json::from_value(payload)?),
            ModelFamily::DecisionTree => Model::Tree(serde_json::from_value(payload)?),
            ModelFamily::RandomForest => Model::Forest(serde_json::from_value(payload)?),
            ModelFamily::AdaBoost => Model::AdaBoost(serde_json::from_value(payload)?),
            ModelFamily::Gbm => Model::Gbm(serde_json::from_value(payload)?),
        })
    }
}

impl Classifier for Model {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }
    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }
    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.inner().predict_proba(row)
    }
    fn predict(&self, row: &[f64]) -> Result<usize> {
        self.inner().predict(row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_round_trip() {
        for f in ModelFamily::ALL {
            assert_eq!(f.key().parse::<ModelFamily>().unwrap(), f);
        }
        assert_eq!("LightGBM".parse::<ModelFamily>().unwrap(), ModelFamily::Gbm);
        assert!("svm".parse::<ModelFamily>().is_err());
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let base = ModelParams::paper(ModelFamily::RandomForest);
        let mut o = BTreeMap::new();
        o.insert("n_estimators".to_string(), Value::from(7));
        o.insert("tree.max_depth".to_string(), Value::from(4));
        let ModelParams::RandomForest(p) = base.with_overrides(&o).unwrap() else {
            panic!("family changed")
        };
        assert_eq!((p.n_estimators, p.tree.max_depth), (7, Some(4)));

        let mut bad = BTreeMap::new();
        bad.insert("depth".to_string(), Value::from(4));
        assert!(base.with_overrides(&bad).is_err());
        let mut invalid = BTreeMap::new();
        invalid.insert("n_estimators".to_string(), Value::from(0));
        assert!(base.with_overrides(&invalid).is_err());
    }

    #[test]
    fn paper_presets_validate() {
        for f in ModelFamily::ALL {
            ModelParams::paper(f).validate().unwrap();
            ModelParams::default_for(f).validate().unwrap();
            assert_eq!(ModelParams::paper(f).family(), f);
        }
    }

    #[test]
    fn fit_dispatch_and_shared_contract() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 10) as f64, (i % 3) as f64])
            .collect();
        let labels: Vec<usize> = (0..60).map(|i| usize::from(i % 10 >= 5)).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let y = LabelVector::new(labels, 2).unwrap();
        for f in ModelFamily::ALL {
            let params = match f {
                ModelFamily::Gbm => ModelParams::Gbm(GbmParams {
                    n_estimators: 20,
                    min_data_in_leaf: 5,
                    ..GbmParams::default()
                }),
                ModelFamily::RandomForest => ModelParams::RandomForest(ForestParams {
                    n_estimators: 5,
                    ..ForestParams::default()
                }),
                _ => ModelParams::default_for(f),
            };
            let model = params.fit(&x, &y).unwrap();
            assert_eq!(model.family(), f);
            assert_eq!((model.n_features(), model.n_classes()), (2, 2));
            let pred = model.predict_batch(&x).unwrap();
            let acc = pred.iter().zip(y.labels()).filter(|(a, b)| a == b).count() as f64 / 60.0;
            assert!(acc > 0.9, "{f}: {acc}");
            let p = model.predict_proba(x.row(0)).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
