//! Tabular length-of-stay prediction toolkit.
//!
//! The crate covers the whole path from raw inpatient discharge CSVs to
//! evaluated classifiers:
//!
//! * [`dataset`]: typed CSV ingestion, missing-value cleaning and profiling.
//! * [`encoding`]: ordinal category codes, length-of-stay bins and
//!   standardization into a dense [`FeatureMatrix`].
//! * [`decomposition`]: principal component analysis.
//! * [`learners`]: decision trees and one-vs-rest logistic regression.
//! * [`ensembles`]: random forest, multiclass AdaBoost and a histogram
//!   gradient-boosting machine with GOSS and exclusive feature bundling.
//! * [`evaluation`]: confusion matrices, accuracy/precision/recall/F1,
//!   Cohen's kappa, MCC and stratified splitting.
//! * [`tuning`]: seeded random hyperparameter search.
//! * [`pipeline`]: config-driven end-to-end runs, synthetic data, model
//!   persistence and report emission.

// Guards such as `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod decomposition;
pub mod encoding;
pub mod ensembles;
pub mod error;
pub mod evaluation;
pub mod learners;
pub mod model;
pub mod pipeline;
pub mod tuning;

mod rng;

pub use dataset::{ColumnKind, ColumnSchema, Dataset};
pub use decomposition::PcaModel;
pub use encoding::{BinSpec, FeatureMatrix, LabelVector};
pub use error::{Error, Result};
pub use evaluation::{ConfusionMatrix, MetricsReport};
pub use model::{Classifier, Model, ModelFamily, ModelParams};
