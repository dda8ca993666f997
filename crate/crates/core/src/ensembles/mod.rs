//! Tree ensembles: bagged forests, multiclass AdaBoost and histogram
//! gradient boosting.

pub mod adaboost;
pub mod efb;
pub mod forest;
pub mod gbm;
pub mod goss;
pub mod histogram;

pub use adaboost::{
    adaboost_predict, fit_adaboost, fit_adaboost_traced, AdaBoostModel, AdaBoostParams,
    AdaBoostTrace,
};
pub use efb::{efb_bundle, merge_bundle, unbundle, MergedBundle};
pub use forest::{fit_forest, forest_predict, ForestModel, ForestParams};
pub use gbm::{
    fit_gbm, fit_gbm_traced, gbm_predict, leaf_weight, GbmModel, GbmParams, GbmTrace, RegNode,
    RegTree,
};
pub use goss::goss_sample;
pub use histogram::BinMapper;
