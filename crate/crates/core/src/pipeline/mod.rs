//! Configured end-to-end runs and their artifacts.

pub mod config;
pub mod persist;
pub mod report;
pub mod run;
pub mod synth;

pub use config::{
    expand_dotted, ModelConfig, ParamSource, PcaConfig, PipelineConfig, Preset, SearchConfig,
    SelectionConfig, SplitConfig,
};
pub use persist::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
pub use report::{metrics_table, Emitter, Manifest, SkippedArtifact};
pub use run::{
    evaluate_run, ingest, load_input, profile_input, run_on_dataset, run_pipeline, Evaluation,
    FittedPipeline, Preprocessor, Reducer, RunLog, RunSummary,
};
pub use synth::{synthesize_dataset, SynthSpec, SEVERITY_COLUMN};
