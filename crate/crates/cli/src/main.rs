//! `los`: train and evaluate length-of-stay classifiers from discharge CSVs.
//!
//! Exit codes: 0 on success, 1 on a usage or validation error, 2 on a
//! runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use los_core::evaluation::{Metric, MetricsReport};
use los_core::pipeline::{
    evaluate_run, ingest, metrics_table, profile_input, run_pipeline, synthesize_dataset,
    PipelineConfig, SearchConfig, SynthSpec,
};
use los_core::ModelFamily;

#[derive(Debug, Parser)]
#[command(name = "los", version, about = "Length-of-stay classification toolkit")]
struct Cli {
    /// JSON run configuration; dotted keys such as "pca.enabled" are accepted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the split, the search and the model.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Input CSV; overrides the config's "input".
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model family: logistic, decision_tree, random_forest, adaboost or gbm.
    #[arg(long)]
    family: Option<ModelFamily>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, drop and clean the input; write the cleaned CSV and a report.
    Ingest(InputArgs),
    /// Write exploratory tables for the cleaned input.
    Profile(InputArgs),
    /// Run the full pipeline as configured.
    Train {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Re-score a finished run on its test rows, or on every row of another CSV.
    Evaluate {
        /// Directory of a finished run.
        #[arg(long)]
        run: PathBuf,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Run the pipeline with a random hyperparameter search.
    Tune {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Number of sampled configurations.
        #[arg(long)]
        trials: Option<usize>,
        /// Metric maximized on the validation rows.
        #[arg(long)]
        objective: Option<Metric>,
    },
    /// Write a synthetic SPARCS-shaped CSV with planted effects.
    Synth {
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        /// Zero every planted effect, making labels independent of features.
        #[arg(long)]
        null: bool,
        /// Standard deviation of the log-stay noise.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Combine the metrics of finished runs into one table.
    Report {
        /// Run directories, one table row each.
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    Ok(config)
}

fn apply_input(config: &mut PipelineConfig, input: &InputArgs) {
    if let Some(path) = &input.input {
        config.input = Some(path.clone());
    }
}

fn apply_family(config: &mut PipelineConfig, model: &ModelArgs) {
    if let Some(family) = model.family {
        if family != config.model.family {
            config.model.family = family;
            // Family-specific parameters no longer apply.
            config.model.params = None;
            if let Some(search) = &mut config.model.search {
                search.space = None;
            }
        }
    }
}

fn print_metrics(name: &str, report: &MetricsReport) -> anyhow::Result<()> {
    print!("{}", metrics_table(&[(name.to_string(), report.clone())])?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Ingest(input) => {
            let mut config = load_config(&cli)?;
            apply_input(&mut config, input);
            let (report, _) = ingest(&config)?;
            println!(
                "cleaned data written to {} ({} rows dropped)",
                config.output.join("cleaned.csv").display(),
                report.rows_dropped
            );
        }
        Command::Profile(input) => {
            let mut config = load_config(&cli)?;
            apply_input(&mut config, input);
            let manifest = profile_input(&config)?;
            println!(
                "{} files written to {}",
                manifest.files.len(),
                config.output.display()
            );
        }
        Command::Train { input, model } => {
            let mut config = load_config(&cli)?;
            apply_input(&mut config, input);
            apply_family(&mut config, model);
            config.validate()?;
            let summary = run_pipeline(&config)?;
            print_metrics(summary.params.family().display_name(), &summary.report)?;
            println!("artifacts written to {}", summary.output.display());
        }
        Command::Evaluate { run, input } => {
            let eval = evaluate_run(run, input.input.as_deref())?;
            let json = serde_json::to_string_pretty(&eval.report)?;
            if let Some(out) = &cli.out {
                std::fs::create_dir_all(out)
                    .with_context(|| format!("creating {}", out.display()))?;
                std::fs::write(out.join("metrics.json"), format!("{json}\n"))?;
                std::fs::write(
                    out.join("metrics.csv"),
                    metrics_table(&[(run_name(run), eval.report.clone())])?,
                )?;
            }
            println!("{json}");
        }
        Command::Tune {
            input,
            model,
            trials,
            objective,
        } => {
            let mut config = load_config(&cli)?;
            apply_input(&mut config, input);
            apply_family(&mut config, model);
            let search = config.model.search.get_or_insert_with(|| SearchConfig {
                seed: cli.seed.unwrap_or(SearchConfig::default().seed),
                ..SearchConfig::default()
            });
            if let Some(n) = trials {
                search.n_trials = *n;
            }
            if let Some(m) = objective {
                search.objective = *m;
            }
            config.model.preset = None;
            config.model.params = None;
            config.validate()?;
            let summary = run_pipeline(&config)?;
            let search = summary.search.as_ref().context("search outcome missing")?;
            println!(
                "best trial #{} of {}: {} = {:.6}",
                search.best_index,
                search.trials.len(),
                search.objective,
                search.best().objective.unwrap_or(f64::NAN)
            );
            print_metrics(summary.params.family().display_name(), &summary.report)?;
            println!("artifacts written to {}", summary.output.display());
        }
        Command::Synth { rows, null, noise } => {
            let seed = cli.seed.unwrap_or(SynthSpec::default().seed);
            let mut spec = if *null {
                SynthSpec::null(*rows, seed)
            } else {
                SynthSpec::with_rows(*rows, seed)
            };
            if let Some(noise) = noise {
                spec.noise = *noise;
            }
            let ds = synthesize_dataset(&spec)?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("synthetic.csv");
            ds.write_csv(&path)?;
            println!("{} rows written to {}", ds.n_rows(), path.display());
        }
        Command::Report { runs } => {
            let mut rows = Vec::with_capacity(runs.len());
            for dir in runs {
                let path = dir.join("metrics.json");
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let report: MetricsReport = serde_json::from_str(&text)?;
                rows.push((run_label(dir)?, report));
            }
            let table = metrics_table(&rows)?;
            match &cli.out {
                Some(out) => {
                    std::fs::create_dir_all(out)
                        .with_context(|| format!("creating {}", out.display()))?;
                    std::fs::write(out.join("metrics_table.csv"), &table)?;
                    println!(
                        "{} rows written to {}",
                        rows.len(),
                        out.join("metrics_table.csv").display()
                    );
                }
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn run_name(dir: &Path) -> String {
    dir.file_name().map_or_else(
        || dir.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

/// Model display name from the run's config, or the directory name.
fn run_label(dir: &Path) -> anyhow::Result<String> {
    let path = dir.join("config.json");
    if !path.exists() {
        return Ok(run_name(dir));
    }
    let config = PipelineConfig::load(&path)?;
    let name = config.model.family.display_name();
    Ok(match config.model.search {
        Some(_) => format!("{name} (tuned)"),
        None => name.to_string(),
    })
}

fn is_validation(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause
            .downcast_ref::<los_core::Error>()
            .is_some_and(los_core::Error::is_validation)
    })
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !text.ends_with(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(if is_validation(&err) { 1 } else { 2 })
        }
    }
}
