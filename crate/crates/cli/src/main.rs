//! `leafdx` — train, evaluate, and serve per-plant leaf disease models.

use anyhow::{bail, ensure, Context};
use leafdx_cli::serve;
use clap::{Args, Parser, Subcommand};
use leafdx::dataset::{read_feature_cache, write_feature_cache, FeatureCache, FeatureTable};
use leafdx::forest::{load_model, save_model, ForestParams};
use leafdx::pipeline::{
    self, crossval_plant, extract_from_dir, prediction_summary, train_plant, TrainConfig,
};
use leafdx::jsonfmt;
use leafdx::report::{metrics_json, render_report};
use leafdx::select::correlation_matrix;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "leafdx", version, about = "Leaf disease classification from leaf photographs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where the rows come from: a feature cache CSV or a raw image tree.
#[derive(Args)]
struct InputArgs {
    /// Feature cache CSV produced by `extract`
    #[arg(long, value_name = "CSV")]
    features: Option<PathBuf>,
    /// Dataset root (<Plant>___<Class> directories); features are extracted on the fly
    #[arg(long, value_name = "DIR", conflicts_with = "features")]
    data_dir: Option<PathBuf>,
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<FeatureCache> {
        match (&self.features, &self.data_dir) {
            (Some(csv), None) => {
                ensure!(csv.is_file(), "feature cache not found: {}", csv.display());
                Ok(read_feature_cache(csv)?)
            }
            (None, Some(dir)) => Ok(extract_from_dir(dir)?),
            _ => bail!("supply exactly one of --features or --data-dir"),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Random seed driving the split, bootstraps, and folds
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Trees per forest
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Pairwise |r| at or above which the later feature is dropped
    #[arg(long, default_value_t = 0.95)]
    corr_drop: f64,
    /// Minimum |r(feature, target)| a feature must reach to survive
    #[arg(long, default_value_t = 0.1)]
    target_corr_min: f64,
    /// Train on all 15 features, skipping selection
    #[arg(long)]
    no_select: bool,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            forest: ForestParams { n_trees: self.trees, seed: self.seed, ..Default::default() },
            pair_threshold: self.corr_drop,
            target_min: self.target_corr_min,
            select: !self.no_select,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Scan a dataset tree and write the 15-feature cache CSV
    Extract {
        #[arg(long, value_name = "DIR")]
        data_dir: PathBuf,
        /// Output CSV path
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Train one model per plant (80/20 hold-out by default)
    Train {
        #[command(flatten)]
        input: InputArgs,
        /// Plant to train, or "all" for every plant in the input
        #[arg(long)]
        plant: String,
        /// Model output path (single plant)
        #[arg(long, value_name = "FILE", default_value = "model.json")]
        out: PathBuf,
        /// Model output directory (used with --plant all)
        #[arg(long, value_name = "DIR", default_value = "models")]
        models_dir: PathBuf,
        /// Held-out test fraction
        #[arg(long, default_value_t = 0.2)]
        split: f64,
        /// Also write the report bundle here
        #[arg(long, value_name = "DIR")]
        report_dir: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Stratified k-fold cross-validation for one plant
    Crossval {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        plant: String,
        /// Number of folds
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Evaluate a saved model on a feature table
    Evaluate {
        /// Model file from `train`
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        /// Also write the report bundle here
        #[arg(long, value_name = "DIR")]
        report_dir: Option<PathBuf>,
    },
    /// Classify one leaf image
    Predict {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "IMAGE")]
        image: PathBuf,
    },
    /// Render the CSV/JSON/SVG report bundle for a model
    Report {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_name = "DIR")]
        report_dir: PathBuf,
    },
    /// Serve GET /health and POST /predict over HTTP
    Serve {
        /// Directory of model .json files, one per plant
        #[arg(long, value_name = "DIR", default_value = "models")]
        models_dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Serialize)]
struct TrainSummary {
    plant: String,
    model_path: String,
    labels: Vec<String>,
    selected_features: Vec<String>,
    train_rows: usize,
    test_rows: usize,
    test_accuracy: f64,
    test_weighted_f1: f64,
    test_macro_auc: f64,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Extract { data_dir, out } => {
            let cache = extract_from_dir(&data_dir)?;
            ensure!(!cache.rows.is_empty(), "no images produced features under {}", data_dir.display());
            write_feature_cache(&cache, &out)?;
            println!("wrote {} rows to {}", cache.rows.len(), out.display());
        }
        Command::Train { input, plant, out, models_dir, split, report_dir, train } => {
            let cache = input.load()?;
            let cfg = train.config();
            let plants = if plant == "all" { cache.plants() } else { vec![plant.clone()] };
            ensure!(!plants.is_empty(), "input contains no plants");
            if plant == "all" {
                std::fs::create_dir_all(&models_dir)
                    .with_context(|| format!("creating {}", models_dir.display()))?;
            }

            let mut summaries = Vec::new();
            for name in &plants {
                let run = train_plant(&cache, name, split, train.seed, &cfg)?;
                let model_path = if plant == "all" {
                    models_dir.join(format!("{}.json", leafdx::report::sanitize(name)))
                } else {
                    out.clone()
                };
                save_model(&run.model, &model_path)?;
                if let Some(dir) = &report_dir {
                    let bundle_dir = if plants.len() > 1 { dir.join(leafdx::report::sanitize(name)) } else { dir.clone() };
                    render_report(&run.report, run.correlation.as_ref(), &bundle_dir)?;
                }
                summaries.push(TrainSummary {
                    plant: name.clone(),
                    model_path: model_path.display().to_string(),
                    labels: run.model.labels.clone(),
                    selected_features: run.model.selected_features.clone(),
                    train_rows: run.split.train_indices.len(),
                    test_rows: run.split.test_indices.len(),
                    test_accuracy: run.report.accuracy,
                    test_weighted_f1: run.report.weighted_f1,
                    test_macro_auc: run.report.macro_auc,
                });
            }
            if plant == "all" {
                println!("{}", jsonfmt::to_string_pretty(&summaries)?);
            } else {
                println!("{}", jsonfmt::to_string_pretty(&summaries[0])?);
            }
        }
        Command::Crossval { input, plant, k, train } => {
            let cache = input.load()?;
            let cv = crossval_plant(&cache, &plant, k, train.seed, &train.config())?;
            println!("{}", jsonfmt::to_string_pretty(&cv)?);
        }
        Command::Evaluate { model, input, report_dir } => {
            ensure!(model.is_file(), "model file not found: {}", model.display());
            let model = load_model(&model)?;
            let cache = input.load()?;
            let table = FeatureTable::from_cache(&cache, &model.plant)?;
            let report = leafdx::evaluate::evaluate_model(&model, &table)?;
            if let Some(dir) = &report_dir {
                let corr = correlation_matrix(&cache, &model.plant)?;
                render_report(&report, Some(&corr), dir)?;
            }
            print!("{}", metrics_json(&report));
        }
        Command::Predict { model, image } => {
            ensure!(model.is_file(), "model file not found: {}", model.display());
            ensure!(image.is_file(), "image file not found: {}", image.display());
            let model = load_model(&model)?;
            let (prediction, _features) = pipeline::predict_image(&model, &image)?;
            println!("{}", jsonfmt::to_string(&prediction_summary(&model, &prediction))?);
        }
        Command::Report { model, input, report_dir } => {
            ensure!(model.is_file(), "model file not found: {}", model.display());
            let model = load_model(&model)?;
            let cache = input.load()?;
            let table = FeatureTable::from_cache(&cache, &model.plant)?;
            let report = leafdx::evaluate::evaluate_model(&model, &table)?;
            let corr = correlation_matrix(&cache, &model.plant)?;
            let bundle = render_report(&report, Some(&corr), &report_dir)?;
            for file in &bundle.files {
                println!("{}", file.display());
            }
        }
        Command::Serve { models_dir, port } => {
            ensure!(models_dir.is_dir(), "models directory not found: {}", models_dir.display());
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(serve::run(&models_dir, port))?;
        }
    }
    Ok(())
}
