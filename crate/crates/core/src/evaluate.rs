//! Model evaluation: confusion matrices, precision/recall/F1, stratified
//! k-fold cross-validation, and one-vs-rest ROC/AUC scored by forest vote
//! fractions.

use crate::dataset::FeatureTable;
use crate::forest::{ForestError, ForestModel};
use crate::pipeline::{train_on_table, TrainConfig};
use crate::rng;
use rand::seq::SliceRandom;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label {0} out of range [0,{1})")]
    LabelOutOfRange(usize, usize),
    #[error("y_true and y_pred have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("class {label:?} has {count} samples, fewer than k = {k}")]
    TooFewSamplesPerClass { label: String, count: usize, k: usize },
    #[error("roc needs at least one positive and one negative sample")]
    SingleClassInput,
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Select(#[from] crate::select::SelectError),
}

/// Row = true class, column = predicted class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }

    /// CSV with a leading `true\predicted` name column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for l in &self.labels {
            write!(out, ",{l}").unwrap();
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(l);
            for c in &self.counts[i] {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Count (true, predicted) pairs into a k x k matrix.
pub fn confusion(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k {
            return Err(EvalError::LabelOutOfRange(t, k));
        }
        if p >= k {
            return Err(EvalError::LabelOutOfRange(p, k));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { labels: (0..k).map(|i| i.to_string()).collect(), counts })
}

/// Per-class precision/recall/F1 plus supports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Scalar metrics derived from a confusion matrix. 0/0 cells are 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, per-class precision/recall/F1, macro and support-weighted F1.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = cm.counts.len();
    let mut per_class = Vec::with_capacity(k);
    for i in 0..k {
        let tp = cm.counts[i][i];
        let precision = ratio(tp, cm.col_sum(i));
        let recall = ratio(tp, cm.row_sum(i));
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            label: cm.labels[i].clone(),
            precision,
            recall,
            f1,
            support: cm.row_sum(i),
        });
    }
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64;
    let weighted_f1 = per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / total as f64;
    Ok(Metrics {
        accuracy: cm.trace() as f64 / total as f64,
        per_class,
        macro_f1,
        weighted_f1,
    })
}

/// ROC curve points for one binary problem, thresholds swept over distinct
/// scores descending, ties grouped.
pub fn roc_curve(y_true: &[bool], scores: &[f64]) -> Result<Vec<(f64, f64)>, EvalError> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), scores.len()));
    }
    let pos = y_true.iter().filter(|&&t| t).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClassInput);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if y_true[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    if *points.last().unwrap() != (1.0, 1.0) {
        points.push((1.0, 1.0));
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn auc(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Full evaluation artifact for one model on one test table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub plant: String,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub confusion: ConfusionMatrix,
    /// Per-class one-vs-rest ROC points; empty when the class is missing
    /// from the test set.
    pub roc: Vec<Vec<(f64, f64)>>,
    pub auc: Vec<f64>,
    pub macro_auc: f64,
}

/// Predict every row of `table` and assemble metrics, confusion, and
/// one-vs-rest ROC/AUC (scores = vote fractions).
pub fn evaluate_model(model: &ForestModel, table: &FeatureTable) -> Result<EvaluationReport, EvalError> {
    let projected = table.select_columns(&model.selected_features);
    let k = model.labels.len();
    let n_trees = model.trees.len() as f64;

    let mut y_pred = Vec::with_capacity(table.len());
    let mut vote_fractions: Vec<Vec<f64>> = Vec::with_capacity(table.len());
    for row in &projected.x {
        let p = model.predict(row)?;
        y_pred.push(p.label_index);
        vote_fractions.push(p.votes.iter().map(|&v| v as f64 / n_trees).collect());
    }

    let mut cm = confusion(&table.y, &y_pred, k)?;
    cm.labels = model.labels.clone();
    let m = metrics(&cm)?;

    let mut roc = Vec::with_capacity(k);
    let mut aucs = Vec::with_capacity(k);
    for c in 0..k {
        let truth: Vec<bool> = table.y.iter().map(|&y| y == c).collect();
        let scores: Vec<f64> = vote_fractions.iter().map(|v| v[c]).collect();
        match roc_curve(&truth, &scores) {
            Ok(curve) => {
                aucs.push(auc(&curve));
                roc.push(curve);
            }
            Err(EvalError::SingleClassInput) => {
                log::warn!(
                    "class {:?} has no {} samples in the test set; its ROC/AUC is reported as 0",
                    model.labels[c],
                    if truth.iter().any(|&t| t) { "negative" } else { "positive" }
                );
                aucs.push(0.0);
                roc.push(Vec::new());
            }
            Err(e) => return Err(e),
        }
    }
    let macro_auc = aucs.iter().sum::<f64>() / k as f64;

    Ok(EvaluationReport {
        plant: model.plant.clone(),
        accuracy: m.accuracy,
        per_class: m.per_class,
        macro_f1: m.macro_f1,
        weighted_f1: m.weighted_f1,
        confusion: cm,
        roc,
        auc: aucs,
        macro_auc,
    })
}

/// Stratified fold ids (0..k) per sample, seeded and deterministic.
pub fn stratified_folds(y: &[usize], labels: &[String], k: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    assert!(k >= 2, "k-fold needs k >= 2");
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in y.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    for (&class, indices) in &by_class {
        if indices.len() < k {
            return Err(EvalError::TooFewSamplesPerClass {
                label: labels.get(class).cloned().unwrap_or_else(|| class.to_string()),
                count: indices.len(),
                k,
            });
        }
    }
    let mut folds = vec![0usize; y.len()];
    for (&class, indices) in &by_class {
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut rng::stream_rng(seed, class as u64));
        for (pos, &sample) in shuffled.iter().enumerate() {
            folds[sample] = pos % k;
        }
    }
    Ok(folds)
}

/// Cross-validation outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub k: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub fold_weighted_f1: Vec<f64>,
    pub mean_weighted_f1: f64,
    /// Features kept by the per-fold selection, per fold.
    pub fold_selected: Vec<Vec<String>>,
}

/// Stratified k-fold CV: feature selection and forest training are refit
/// on each fold's training side.
pub fn kfold_cv(table: &FeatureTable, cfg: &TrainConfig, k: usize, seed: u64) -> Result<CvResult, EvalError> {
    let folds = stratified_folds(&table.y, &table.labels, k, seed)?;

    let mut fold_accuracies = Vec::with_capacity(k);
    let mut fold_weighted_f1 = Vec::with_capacity(k);
    let mut fold_selected = Vec::with_capacity(k);
    for fold in 0..k {
        let train_idx: Vec<usize> = (0..table.len()).filter(|&i| folds[i] != fold).collect();
        let test_idx: Vec<usize> = (0..table.len()).filter(|&i| folds[i] == fold).collect();
        let train = table.subset(&train_idx);
        let test = table.subset(&test_idx);

        let trained = train_on_table(&train, cfg)?;
        let report = evaluate_model(&trained.model, &test)?;
        fold_accuracies.push(report.accuracy);
        fold_weighted_f1.push(report.weighted_f1);
        fold_selected.push(trained.model.selected_features.clone());
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
    let mean_weighted_f1 = fold_weighted_f1.iter().sum::<f64>() / k as f64;
    Ok(CvResult { k, fold_accuracies, mean_accuracy, fold_weighted_f1, mean_weighted_f1, fold_selected })
}
