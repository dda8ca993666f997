//! Run configuration.
//!
//! Configs are JSON. Keys may be nested objects or dotted paths
//! (`"pca.enabled": true`); both spellings can be mixed in one document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dataset::{
    sparcs_schema, validate_schema, ColumnSchema, MissingPolicy, SPARCS_DROP_LIST,
};
use crate::decomposition::DEFAULT_VARIANCE_THRESHOLD;
use crate::encoding::{sparcs_orders, BinSpec};
use crate::error::{Error, Result};
use crate::evaluation::Metric;
use crate::model::{ModelFamily, ModelParams};
use crate::tuning::{SearchSpace, DEFAULT_TRIALS};

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Settings reported for the hospital study.
    #[default]
    Paper,
    /// Library defaults.
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub enabled: bool,
    /// Cumulative explained-variance fraction to keep.
    pub threshold: f64,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            threshold: DEFAULT_VARIANCE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub enabled: bool,
    /// Number of features kept, ranked by a preliminary tree's importance.
    pub top_k: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            top_k: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Samplers layered over the preset; the family default when absent.
    pub space: Option<SearchSpace>,
    pub n_trials: usize,
    pub objective: Metric,
    /// Share of the training rows held out to score trials.
    pub validation_fraction: f64,
    pub preset: Preset,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            space: None,
            n_trials: DEFAULT_TRIALS,
            objective: Metric::F1,
            validation_fraction: 0.2,
            preset: Preset::Paper,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: ModelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    /// Explicit parameters, merged over the library defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: ModelFamily::Gbm,
            preset: None,
            params: None,
            search: None,
        }
    }
}

/// How the model's parameters are chosen for one run.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSource {
    Fixed(ModelParams),
    Search {
        base: ModelParams,
        space: SearchSpace,
        config: SearchConfig,
    },
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let given = [
            self.preset.is_some(),
            self.params.is_some(),
            self.search.is_some(),
        ];
        if given.iter().filter(|g| **g).count() > 1 {
            return Err(Error::Config(
                "model: give at most one of 'preset', 'params' and 'search'".into(),
            ));
        }
        if let Some(search) = &self.search {
            if search.n_trials == 0 {
                return Err(Error::Config("model.search.n_trials must be >= 1".into()));
            }
            if !(search.validation_fraction > 0.0 && search.validation_fraction < 1.0) {
                return Err(Error::Config(format!(
                    "model.search.validation_fraction {} outside (0, 1)",
                    search.validation_fraction
                )));
            }
        }
        self.resolve().map(|_| ())
    }

    /// Resolves the parameter source. With nothing given the "paper" preset is used.
    pub fn resolve(&self) -> Result<ParamSource> {
        let preset = |p: Preset| match p {
            Preset::Paper => ModelParams::paper(self.family),
            Preset::Default => ModelParams::default_for(self.family),
        };
        if let Some(search) = &self.search {
            let space = search
                .space
                .clone()
                .unwrap_or_else(|| SearchSpace::default_for(self.family));
            space.validate()?;
            return Ok(ParamSource::Search {
                base: preset(search.preset),
                space,
                config: search.clone(),
            });
        }
        let params = match &self.params {
            Some(Value::Object(map)) => {
                let overrides: BTreeMap<String, Value> = map.clone().into_iter().collect();
                ModelParams::default_for(self.family).with_overrides(&overrides)?
            }
            Some(other) => {
                return Err(Error::Config(format!(
                    "model.params must be an object, got {other}"
                )))
            }
            None => preset(self.preset.unwrap_or_default()),
        };
        params.validate()?;
        Ok(ParamSource::Fixed(params))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub schema: Vec<ColumnSchema>,
    /// Explicit category orders; other categorical columns are coded by frequency.
    pub orders: BTreeMap<String, Vec<String>>,
    pub drop: Vec<String>,
    pub missing: MissingPolicy,
    pub bins: BinSpec,
    pub pca: PcaConfig,
    pub feature_selection: SelectionConfig,
    pub model: ModelConfig,
    pub split: SplitConfig,
    /// When set, replaces the model's own seed as well.
    pub seed: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            output: PathBuf::from("out"),
            schema: sparcs_schema(),
            orders: sparcs_orders(),
            drop: SPARCS_DROP_LIST.iter().map(|s| s.to_string()).collect(),
            missing: MissingPolicy::default(),
            bins: BinSpec::default(),
            pca: PcaConfig::default(),
            feature_selection: SelectionConfig::default(),
            model: ModelConfig::default(),
            split: SplitConfig::default(),
            seed: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("not valid JSON: {e}")))?;
        let expanded = expand_dotted(raw)?;
        let config: Self =
            serde_json::from_value(expanded).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        validate_schema(&self.schema)?;
        if self.pca.enabled && self.feature_selection.enabled {
            return Err(Error::Config(
                "pca and feature_selection are mutually exclusive".into(),
            ));
        }
        if self.pca.enabled && !(self.pca.threshold > 0.0 && self.pca.threshold <= 1.0) {
            return Err(Error::Config(format!(
                "pca.threshold {} outside (0, 1]",
                self.pca.threshold
            )));
        }
        if self.feature_selection.enabled && self.feature_selection.top_k == 0 {
            return Err(Error::Config("feature_selection.top_k must be >= 1".into()));
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split.test_fraction {} outside (0, 1)",
                self.split.test_fraction
            )));
        }
        self.model.validate()
    }

    /// Replaces every seed in the run (split, search and model) with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.split.seed = seed;
        if let Some(search) = &mut self.model.search {
            search.seed = seed;
        }
    }
}

/// Rewrites `{"a.b": 1}` into `{"a": {"b": 1}}`, recursively, merging with
/// nested spellings of the same path.
pub fn expand_dotted(value: Value) -> Result<Value> {
    match value {
        Value::Object(map) => {
            let mut out = Map::new();
            for (key, child) in map {
                let child = expand_dotted(child)?;
                let mut parts: Vec<&str> = key.split('.').collect();
                if parts.iter().any(|p| p.is_empty()) {
                    return Err(Error::Config(format!("malformed key {key:?}")));
                }
                let last = parts.pop().expect("split yields one part");
                let mut slot = &mut out;
                for part in parts {
                    let entry = slot
                        .entry(part.to_string())
                        .or_insert_with(|| Value::Object(Map::new()));
                    slot = entry.as_object_mut().ok_or_else(|| {
                        Error::Config(format!("key {key:?} conflicts with a non-object value"))
                    })?;
                }
                insert_merged(slot, last, child, &key)?;
            }
            Ok(Value::Object(out))
        }
        other => Ok(other),
    }
}

fn insert_merged(slot: &mut Map<String, Value>, key: &str, value: Value, full: &str) -> Result<()> {
    match (slot.get_mut(key), value) {
        (None, value) => {
            slot.insert(key.to_string(), value);
            Ok(())
        }
        (Some(Value::Object(existing)), Value::Object(incoming)) => {
            for (k, v) in incoming {
                insert_merged(existing, &k, v, full)?;
            }
            Ok(())
        }
        (Some(_), _) => Err(Error::Config(format!("key {full:?} is given twice"))),
    }
}
