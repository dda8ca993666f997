//! End-to-end runs: load, clean, encode, split, scale, reduce, tune, fit,
//! evaluate and emit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ParamSource, PipelineConfig};
use super::persist::{model_from_json, model_to_json};
use super::report::{
    bin_count_rows, emit_importance, emit_metrics, emit_pca, emit_profile, emit_search, Emitter,
    Manifest, BIN_COUNTS_HEADER,
};
use crate::dataset::{load_csv, profile, CleanReport, ColumnSchema, Dataset, MissingPolicy};
use crate::decomposition::{fit_pca, select_components, PcaModel};
use crate::encoding::{fit_standardizer, Encoders, FeatureMatrix, LabelVector, StandardizerParams};
use crate::error::{Error, Result};
use crate::evaluation::{
    confusion_matrix, metrics_report, stratified_split, ConfusionMatrix, MetricsReport,
};
use crate::learners::tree::{fit_tree, MaxFeatures, TreeParams};
use crate::learners::{feature_importance, FeatureImportance};
use crate::model::{Classifier, Model, ModelParams};
use crate::tuning::{random_search, SearchData, SearchOutcome};

pub const CONFIG_FILE: &str = "config.json";
pub const PREPROCESS_FILE: &str = "preprocess.json";
pub const MODEL_FILE: &str = "model.json";

fn stage<T>(name: &'static str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: name,
            source: Box::new(other),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub stage: String,
    pub message: String,
}

/// Decisions and notable events of one run, in order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub entries: Vec<LogEntry>,
}

impl RunLog {
    pub fn note(&mut self, stage: &str, message: impl Into<String>) {
        let message = message.into();
        log::info!("[{stage}] {message}");
        self.entries.push(LogEntry {
            stage: stage.to_string(),
            message,
        });
    }
}

/// Dimensionality step applied after scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reducer {
    Identity,
    Pca {
        model: PcaModel,
        components: usize,
    },
    Select {
        indices: Vec<usize>,
        names: Vec<String>,
    },
}

impl Reducer {
    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        match self {
            Reducer::Identity => Ok(x.clone()),
            Reducer::Pca { model, components } => model.transform(x, *components),
            Reducer::Select { indices, .. } => x.select_columns(indices),
        }
    }
}

/// Everything fitted on training data that turns raw records into model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub schema: Vec<ColumnSchema>,
    pub drop: Vec<String>,
    pub missing: MissingPolicy,
    pub encoders: Encoders,
    pub standardizer: StandardizerParams,
    pub reducer: Reducer,
}

impl Preprocessor {
    /// Drops, cleans, encodes, scales and reduces a raw table. Imputation
    /// statistics come from `raw` itself.
    pub fn transform(&self, raw: &Dataset) -> Result<(FeatureMatrix, LabelVector)> {
        let (ds, _) = raw.drop_columns(&self.drop);
        let (clean, _) = ds.clean(&self.missing)?;
        let (x, y) = self.encoders.design_matrix(&clean)?;
        let z = self.standardizer.transform(&x)?;
        Ok((self.reducer.apply(&z)?, y))
    }
}

#[derive(Debug, Clone)]
pub struct FittedPipeline {
    pub preprocess: Preprocessor,
    pub model: Model,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
}

impl FittedPipeline {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(PREPROCESS_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let preprocess: Preprocessor = serde_json::from_str(&text)?;
        let path = dir.join(MODEL_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let (model, params) = model_from_json(&text)?;
        Ok(Self {
            preprocess,
            model,
            params,
        })
    }

    pub fn evaluate(&self, raw: &Dataset) -> Result<Evaluation> {
        let (x, y) = self.preprocess.transform(raw)?;
        evaluate_model(&self.model, &x, &y)
    }
}

fn evaluate_model(model: &Model, x: &FeatureMatrix, y: &LabelVector) -> Result<Evaluation> {
    let pred = model.predict_batch(x)?;
    let confusion = confusion_matrix(y.labels(), &pred, y.n_classes())?;
    let report = metrics_report(&confusion)?;
    Ok(Evaluation { confusion, report })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output: PathBuf,
    pub manifest: Manifest,
    pub params: ModelParams,
    pub report: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub feature_names: Vec<String>,
    /// `None` for families without impurity importance.
    pub importance: Option<FeatureImportance>,
    pub search: Option<SearchOutcome>,
    pub log: RunLog,
    pub fitted: FittedPipeline,
}

fn input_path(config: &PipelineConfig) -> Result<&Path> {
    config
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("no input CSV given".into()))
}

pub fn load_input(config: &PipelineConfig) -> Result<Dataset> {
    let path = stage("load", input_path(config))?;
    stage("load", load_csv(path, &config.schema))
}

fn drop_and_clean(
    config: &PipelineConfig,
    raw: &Dataset,
    log: &mut RunLog,
) -> Result<(Dataset, CleanReport)> {
    let (ds, dropped) = raw.drop_columns(&config.drop);
    let (clean, mut report) = stage("clean", ds.clean(&config.missing))?;
    report.record_drop(&dropped);
    log.note(
        "clean",
        format!(
            "{} rows in, {} dropped for missing stay, columns dropped: {:?}, absent: {:?}",
            raw.n_rows(),
            report.rows_dropped,
            report.columns_dropped,
            report.columns_absent
        ),
    );
    for (col, fill) in &report.imputed {
        log.note("clean", format!("imputed '{col}' with {fill}"));
    }
    Ok((clean, report))
}

/// Loads, drops and cleans, then writes the cleaned table and its report.
pub fn ingest(config: &PipelineConfig) -> Result<(CleanReport, Manifest)> {
    config.validate()?;
    let raw = load_input(config)?;
    let mut log = RunLog::default();
    let (clean, report) = drop_and_clean(config, &raw, &mut log)?;
    with_emitter(&config.output, |em| {
        let path = em.path("cleaned.csv");
        em.adopt("cleaned.csv");
        clean.write_csv(&path)?;
        em.json("clean_report.json", &report)?;
        em.json("run_log.json", &log)?;
        Ok(())
    })
    .map(|m| (report, m))
}

/// Writes the exploratory tables for the cleaned input.
pub fn profile_input(config: &PipelineConfig) -> Result<Manifest> {
    config.validate()?;
    let raw = load_input(config)?;
    let mut log = RunLog::default();
    let (clean, _) = drop_and_clean(config, &raw, &mut log)?;
    let prof = stage("profile", profile(&clean))?;
    with_emitter(&config.output, |em| emit_profile(em, &prof))
}

fn with_emitter(dir: &Path, body: impl FnOnce(&mut Emitter) -> Result<()>) -> Result<Manifest> {
    let mut em = stage("emit", Emitter::create(dir))?;
    match body(&mut em) {
        Ok(()) => stage("emit", em.finish()),
        Err(e) => {
            em.discard();
            stage("emit", Err(e))
        }
    }
}

/// Loads the configured input and runs every stage.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary> {
    config.validate()?;
    let raw = load_input(config)?;
    run_on_dataset(config, &raw)
}

/// Keeps the `top_k` features with the largest importance in a preliminary
/// full-feature tree, in their original order.
fn select_features(
    x: &FeatureMatrix,
    y: &LabelVector,
    top_k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let params = TreeParams {
        max_features: MaxFeatures::All,
        seed,
        ..TreeParams::paper()
    };
    let tree = fit_tree(x, y, &params)?;
    let mut order: Vec<usize> = (0..x.n_cols()).collect();
    order.sort_by(|&a, &b| tree.importance[b].total_cmp(&tree.importance[a]));
    order.truncate(top_k.min(x.n_cols()));
    order.sort_unstable();
    Ok(order)
}

pub fn run_on_dataset(config: &PipelineConfig, raw: &Dataset) -> Result<RunSummary> {
    config.validate()?;
    let mut log = RunLog::default();
    let (clean, clean_report) = drop_and_clean(config, raw, &mut log)?;

    let encoders = stage(
        "encode",
        Encoders::fit(&clean, &config.orders, config.bins.clone()),
    )?;
    let (x, y) = stage("encode", encoders.design_matrix(&clean))?;
    log.note(
        "encode",
        format!(
            "{} rows, {} features, {} bins",
            x.n_rows(),
            x.n_cols(),
            y.n_classes()
        ),
    );

    let (train_idx, test_idx) = stage(
        "split",
        stratified_split(&y, config.split.test_fraction, config.split.seed),
    )?;
    log.note(
        "split",
        format!(
            "{} train / {} test rows, seed {}",
            train_idx.len(),
            test_idx.len(),
            config.split.seed
        ),
    );
    let (x_train, y_train) = (x.select_rows(&train_idx), y.select(&train_idx));
    let (x_test, y_test) = (x.select_rows(&test_idx), y.select(&test_idx));

    let standardizer = stage("standardize", fit_standardizer(&x_train))?;
    for (name, zero) in standardizer
        .feature_names
        .iter()
        .zip(&standardizer.zero_variance)
    {
        if *zero {
            log.note(
                "standardize",
                format!("'{name}' has zero variance on the training rows"),
            );
        }
    }
    let z_train = stage("standardize", standardizer.transform(&x_train))?;

    let reducer = if config.pca.enabled {
        let model = stage("reduce", fit_pca(&z_train))?;
        let components = stage(
            "reduce",
            select_components(&model.explained_ratio, config.pca.threshold),
        )?;
        log.note(
            "reduce",
            format!(
                "pca keeps {components} of {} components for threshold {}",
                model.n_features(),
                config.pca.threshold
            ),
        );
        if model.degenerate {
            log.note(
                "reduce",
                "training features have no variance; ratios are uniform",
            );
        }
        Reducer::Pca { model, components }
    } else if config.feature_selection.enabled {
        let top_k = config.feature_selection.top_k;
        if top_k > z_train.n_cols() {
            log.note(
                "reduce",
                format!(
                    "top_k {top_k} exceeds {} features; keeping all",
                    z_train.n_cols()
                ),
            );
        }
        let indices = stage(
            "reduce",
            select_features(&z_train, &y_train, top_k, config.split.seed),
        )?;
        let names: Vec<String> = indices
            .iter()
            .map(|&i| z_train.feature_names()[i].clone())
            .collect();
        log.note("reduce", format!("selected features: {names:?}"));
        Reducer::Select { indices, names }
    } else {
        Reducer::Identity
    };
    let r_train = stage("reduce", reducer.apply(&z_train))?;
    let preprocess = Preprocessor {
        schema: config.schema.clone(),
        drop: config.drop.clone(),
        missing: config.missing.clone(),
        encoders,
        standardizer,
        reducer,
    };
    let r_test = stage(
        "reduce",
        preprocess
            .standardizer
            .transform(&x_test)
            .and_then(|z| preprocess.reducer.apply(&z)),
    )?;

    let reseed = |p: ModelParams| match config.seed {
        Some(s) => p.with_seed(s),
        None => p,
    };
    let (params, search) = match stage("search", config.model.resolve())? {
        ParamSource::Fixed(p) => (reseed(p), None),
        ParamSource::Search {
            base,
            space,
            config: search,
        } => {
            let (fit_rows, valid_rows) = stage(
                "search",
                stratified_split(&y_train, search.validation_fraction, search.seed),
            )?;
            let (fx, fy) = (r_train.select_rows(&fit_rows), y_train.select(&fit_rows));
            let (vx, vy) = (
                r_train.select_rows(&valid_rows),
                y_train.select(&valid_rows),
            );
            let data = SearchData {
                train_x: &fx,
                train_y: &fy,
                valid_x: &vx,
                valid_y: &vy,
            };
            let outcome = stage(
                "search",
                random_search(
                    &reseed(base),
                    &space,
                    search.n_trials,
                    search.seed,
                    search.objective,
                    &data,
                ),
            )?;
            let failed = outcome.trials.iter().filter(|t| t.error.is_some()).count();
            log.note(
                "search",
                format!(
                    "{} trials ({failed} failed); best #{} with {} = {}",
                    outcome.trials.len(),
                    outcome.best_index,
                    search.objective,
                    outcome.best().objective.unwrap_or(f64::NAN)
                ),
            );
            (outcome.best_params.clone(), Some(outcome))
        }
    };
    log.note(
        "fit",
        format!(
            "{} with {}",
            params.family().display_name(),
            params.params_json()?
        ),
    );
    let model = stage("fit", params.fit(&r_train, &y_train))?;
    let eval = stage("evaluate", evaluate_model(&model, &r_test, &y_test))?;
    if eval.report.kappa_degenerate || eval.report.mcc_degenerate {
        log.note(
            "evaluate",
            "kappa or MCC has a zero denominator and is reported as 0",
        );
    }
    log.note(
        "evaluate",
        format!("accuracy {} f1 {}", eval.report.accuracy, eval.report.f1()),
    );

    let feature_names = r_train.feature_names().to_vec();
    let importance = match model.raw_importance() {
        Some(raw) => Some(stage("emit", feature_importance(&[&raw], &feature_names))?),
        None => None,
    };
    let model_text = model_to_json(&model, &params)?;
    let prof = stage("profile", profile(&clean))?;
    let mut resolved = config.clone();
    resolved.output = PathBuf::new();

    let manifest = with_emitter(&config.output, |em| {
        em.json(CONFIG_FILE, &resolved)?;
        em.json(PREPROCESS_FILE, &preprocess)?;
        em.text(MODEL_FILE, &model_text)?;
        em.json("clean_report.json", &clean_report)?;
        emit_profile(em, &prof)?;
        em.csv(
            "bin_counts.csv",
            &BIN_COUNTS_HEADER,
            bin_count_rows(&config.bins, &y, &y_train, &y_test),
        )?;
        match &preprocess.reducer {
            Reducer::Pca { model, components } => emit_pca(em, model, *components)?,
            _ => em.skip("pca_variance.csv", "pca disabled"),
        }
        match &importance {
            Some(imp) => emit_importance(em, imp)?,
            None => em.skip(
                "feature_importance.csv",
                "model family has no impurity importance",
            ),
        }
        emit_metrics(
            em,
            params.family().display_name(),
            &config.bins.labels(),
            &eval.confusion,
            &eval.report,
        )?;
        match &search {
            Some(outcome) => emit_search(em, outcome)?,
            None => em.skip("search.json", "no search configured"),
        }
        em.json("run_log.json", &log)?;
        Ok(())
    })?;

    Ok(RunSummary {
        output: config.output.clone(),
        manifest,
        params: params.clone(),
        report: eval.report,
        confusion: eval.confusion,
        n_rows: x.n_rows(),
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        feature_names,
        importance,
        search,
        log,
        fitted: FittedPipeline {
            preprocess,
            model,
            params,
        },
    })
}

/// Re-scores a saved run on `input`, or on the run's own input when `None`.
/// Re-scores a finished run. Without `input` the run's own test rows are
/// rebuilt by replaying its split; with `input` every row of that file is scored.
pub fn evaluate_run(run_dir: &Path, input: Option<&Path>) -> Result<Evaluation> {
    let fitted = stage("load", FittedPipeline::load(run_dir))?;
    if let Some(path) = input {
        let raw = stage("load", load_csv(path, &fitted.preprocess.schema))?;
        return stage("evaluate", fitted.evaluate(&raw));
    }
    let config = stage("load", PipelineConfig::load(&run_dir.join(CONFIG_FILE)))?;
    let path = stage("load", input_path(&config).map(Path::to_path_buf))?;
    let raw = stage("load", load_csv(&path, &fitted.preprocess.schema))?;
    let (x, y) = stage("evaluate", fitted.preprocess.transform(&raw))?;
    let (_, test_idx) = stage(
        "split",
        stratified_split(&y, config.split.test_fraction, config.split.seed),
    )?;
    stage(
        "evaluate",
        evaluate_model(
            &fitted.model,
            &x.select_rows(&test_idx),
            &y.select(&test_idx),
        ),
    )
}
