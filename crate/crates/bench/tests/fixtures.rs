use los_bench::{design, params};
use los_core::{ModelFamily, ModelParams};
use serde_json::json;

#[test]
fn design_is_deterministic_and_labelled() {
    let (x, y) = design(400, 9).unwrap();
    assert_eq!(x.n_rows(), y.len());
    assert!(x.n_cols() > 0);
    let (x2, y2) = design(400, 9).unwrap();
    assert_eq!(x, x2);
    assert_eq!(y, y2);
}

#[test]
fn overrides_reach_the_parameters() {
    match params(ModelFamily::Gbm, &[("n_estimators", json!(7))]).unwrap() {
        ModelParams::Gbm(p) => assert_eq!(p.n_estimators, 7),
        other => panic!("{other:?}"),
    }
    assert!(params(ModelFamily::Gbm, &[("bogus", json!(1))]).is_err());
}
