//! Shared fixtures for the benchmarks.

use std::collections::BTreeMap;

use los_core::dataset::MissingPolicy;
use los_core::encoding::{sparcs_orders, Encoders};
use los_core::pipeline::{synthesize_dataset, SynthSpec};
use los_core::{BinSpec, FeatureMatrix, LabelVector, ModelFamily, ModelParams, Result};

/// Encoded synthetic discharges with the default length-of-stay bins.
pub fn design(rows: usize, seed: u64) -> Result<(FeatureMatrix, LabelVector)> {
    let raw = synthesize_dataset(&SynthSpec::with_rows(rows, seed))?;
    let (clean, _) = raw.clean(&MissingPolicy::default())?;
    let encoders = Encoders::fit(&clean, &sparcs_orders(), BinSpec::default())?;
    encoders.design_matrix(&clean)
}

/// Default parameters for `family` with the given overrides applied.
pub fn params(family: ModelFamily, overrides: &[(&str, serde_json::Value)]) -> Result<ModelParams> {
    let map: BTreeMap<String, serde_json::Value> = overrides
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    ModelParams::default_for(family).with_overrides(&map)
}
