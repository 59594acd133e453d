//! End-to-end composition: batch feature extraction, per-plant training
//! with leak-free feature selection, and single-image prediction.
//!
//! Every run hangs off one user seed. Sub-tasks draw from derived streams
//! (split = 1, forest = 2, folds = 3) so no two stages share randomness.

use crate::dataset::{
    self, load_image, stratified_split, CacheRow, DatasetError, DatasetIndex, FeatureCache,
    FeatureTable, SplitAssignment,
};
use crate::evaluate::{evaluate_model, EvalError, EvaluationReport};
use crate::features::{extract_feature_vector, FeatureVector};
use crate::forest::{fit_forest, ForestError, ForestModel, ForestParams, Prediction};
use crate::rng::derive_seed;
use crate::select::{correlation_matrix_of_table, select_features, CorrelationMatrix, SelectionResult};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// Seed stream domains, so the split, the forest, and CV folds never share
/// a random stream even though they flow from one `--seed`.
pub const SEED_DOMAIN_SPLIT: u64 = 1;
pub const SEED_DOMAIN_FOREST: u64 = 2;
pub const SEED_DOMAIN_FOLDS: u64 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Knobs shared by hold-out training and cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub forest: ForestParams,
    pub pair_threshold: f64,
    pub target_min: f64,
    /// When false, all 15 features are used unselected.
    pub select: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            forest: ForestParams::default(),
            pair_threshold: crate::select::DEFAULT_PAIR_THRESHOLD,
            target_min: crate::select::DEFAULT_TARGET_MIN,
            select: true,
        }
    }
}

/// Selection outcome plus the model it fed.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: ForestModel,
    pub correlation: Option<CorrelationMatrix>,
    pub selection: Option<SelectionResult>,
}

/// Fit selection (on this table only) and then the forest.
pub fn train_on_table(table: &FeatureTable, cfg: &TrainConfig) -> Result<TrainedModel, EvalError> {
    if cfg.select {
        let corr = correlation_matrix_of_table(table)?;
        let sel = select_features(&corr, cfg.pair_threshold, cfg.target_min);
        let selected = table.select_columns(&sel.kept);
        let model = fit_forest(&selected, &cfg.forest)?;
        Ok(TrainedModel { model, correlation: Some(corr), selection: Some(sel) })
    } else {
        let model = fit_forest(table, &cfg.forest)?;
        Ok(TrainedModel { model, correlation: None, selection: None })
    }
}

/// Extract features for every image in the index, in parallel, gathering
/// results in index order. Undecodable or foreground-free images are
/// logged and skipped, never fatal.
pub fn extract_features(index: &DatasetIndex) -> FeatureCache {
    let rows: Vec<Option<CacheRow>> = index
        .entries
        .par_iter()
        .map(|entry| {
            let img = match load_image(&entry.image_path) {
                Ok(img) => img,
                Err(e) => {
                    log::warn!("skipping {}: {e}", entry.image_path.display());
                    return None;
                }
            };
            match extract_feature_vector(&img) {
                Ok(features) => Some(CacheRow {
                    image_path: entry.image_path.display().to_string(),
                    label: entry.full_label(),
                    features,
                }),
                Err(e) => {
                    log::warn!("skipping {}: {e}", entry.image_path.display());
                    None
                }
            }
        })
        .collect();
    FeatureCache { rows: rows.into_iter().flatten().collect() }
}

/// Everything produced by one per-plant training run.
#[derive(Debug)]
pub struct PlantRun {
    pub model: ForestModel,
    pub report: EvaluationReport,
    pub correlation: Option<CorrelationMatrix>,
    pub selection: Option<SelectionResult>,
    pub split: SplitAssignment,
}

/// Hold-out training for one plant: stratified split, selection fit on the
/// training side only, forest fit, evaluation on the test side.
pub fn train_plant(
    cache: &FeatureCache,
    plant: &str,
    test_fraction: f64,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<PlantRun, PipelineError> {
    let table = FeatureTable::from_cache(cache, plant)?;
    let split = stratified_split(&table.y, test_fraction, derive_seed(seed, SEED_DOMAIN_SPLIT))?;
    let train = table.subset(&split.train_indices);
    let test = table.subset(&split.test_indices);

    let mut cfg = cfg.clone();
    cfg.forest.seed = derive_seed(seed, SEED_DOMAIN_FOREST);
    let trained = train_on_table(&train, &cfg).map_err(PipelineError::Eval)?;
    let report = evaluate_model(&trained.model, &test).map_err(PipelineError::Eval)?;
    Ok(PlantRun {
        model: trained.model,
        report,
        correlation: trained.correlation,
        selection: trained.selection,
        split,
    })
}

/// Per-plant k-fold cross-validation from one user seed.
pub fn crossval_plant(
    cache: &FeatureCache,
    plant: &str,
    k: usize,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<crate::evaluate::CvResult, PipelineError> {
    let table = FeatureTable::from_cache(cache, plant)?;
    let mut cfg = cfg.clone();
    cfg.forest.seed = derive_seed(seed, SEED_DOMAIN_FOREST);
    crate::evaluate::kfold_cv(&table, &cfg, k, derive_seed(seed, SEED_DOMAIN_FOLDS))
        .map_err(PipelineError::Eval)
}

/// Wire/print form of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionSummary {
    pub plant: String,
    pub label: String,
    pub confidence: f64,
    pub votes: BTreeMap<String, u64>,
}

pub fn prediction_summary(model: &ForestModel, p: &Prediction) -> PredictionSummary {
    PredictionSummary {
        plant: model.plant.clone(),
        label: p.label.clone(),
        confidence: p.confidence,
        votes: model.labels.iter().cloned().zip(p.votes.iter().copied()).collect(),
    }
}

/// Run the full chain on one image file and classify it.
pub fn predict_image(
    model: &ForestModel,
    image_path: &Path,
) -> Result<(Prediction, FeatureVector), PipelineError> {
    let img = load_image(image_path)?;
    predict_raster(model, &img)
}

/// Classify an already-decoded image.
pub fn predict_raster(
    model: &ForestModel,
    img: &crate::imaging::RasterImage,
) -> Result<(Prediction, FeatureVector), PipelineError> {
    let features = extract_feature_vector(img)?;
    let prediction = model.predict_vector(&features)?;
    Ok((prediction, features))
}

/// Scan + extract in one call (the `extract` subcommand).
pub fn extract_from_dir(root: &Path) -> Result<FeatureCache, PipelineError> {
    let index = dataset::scan_dataset(root)?;
    Ok(extract_features(&index))
}
