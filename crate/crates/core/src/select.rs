//! Correlation-based feature selection: drop one of every highly
//! correlated feature pair, then drop features barely correlated with the
//! class target.

use crate::dataset::{DatasetError, FeatureCache, FeatureTable};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("input vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub const DEFAULT_PAIR_THRESHOLD: f64 = 0.95;
pub const DEFAULT_TARGET_MIN: f64 = 0.1;

/// Pearson product-moment correlation; zero-variance inputs correlate 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, SelectError> {
    if x.len() != y.len() {
        return Err(SelectError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(SelectError::TooFewSamples(x.len()));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Ok(0.0);
    }
    // sqrt of the product (not product of sqrts): x correlated with itself
    // then divides cov by sqrt(cov^2) and lands on exactly 1.
    Ok((cov / (var_x * var_y).sqrt()).clamp(-1.0, 1.0))
}

/// Symmetric correlation matrix over features plus the class target
/// (encoded as its integer index), target last.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    /// Feature names with `"target"` appended.
    pub names: Vec<String>,
    /// Row-major (d+1) x (d+1) values.
    pub values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim() + j]
    }

    /// |r| against the target column for feature `i`.
    pub fn target_corr(&self, i: usize) -> f64 {
        self.at(i, self.dim() - 1)
    }

    /// CSV rendering with a leading name column (report artifact).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("name");
        for n in &self.names {
            write!(out, ",{n}").unwrap();
        }
        out.push('\n');
        for (i, n) in self.names.iter().enumerate() {
            out.push_str(n);
            for j in 0..self.dim() {
                write!(out, ",{}", crate::jsonfmt::fmt_f64(self.at(i, j))).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Build the feature/target correlation matrix for one plant's rows.
pub fn correlation_matrix(cache: &FeatureCache, plant: &str) -> Result<CorrelationMatrix, SelectError> {
    let table = FeatureTable::from_cache(cache, plant)?;
    correlation_matrix_of_table(&table)
}

/// Correlation matrix of an in-memory table (features + target last).
pub fn correlation_matrix_of_table(table: &FeatureTable) -> Result<CorrelationMatrix, SelectError> {
    let n = table.len();
    if n < 2 {
        return Err(SelectError::TooFewSamples(n));
    }
    let d = table.feature_names.len();
    let mut columns: Vec<Vec<f64>> = (0..d)
        .map(|c| table.x.iter().map(|row| row[c]).collect())
        .collect();
    columns.push(table.y.iter().map(|&v| v as f64).collect());

    let dim = d + 1;
    let mut values = vec![0.0; dim * dim];
    for i in 0..dim {
        values[i * dim + i] = 1.0;
        for j in i + 1..dim {
            let r = pearson(&columns[i], &columns[j])?;
            values[i * dim + j] = r;
            values[j * dim + i] = r;
        }
    }
    let mut names = table.feature_names.clone();
    names.push("target".to_string());
    Ok(CorrelationMatrix { names, values })
}

/// Why a feature was dropped (or force-kept).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// |r| with an earlier kept feature reached the pair threshold.
    PairwiseRedundant,
    /// |r| with the target fell below the minimum.
    LowTargetCorrelation,
    /// Rules would have dropped it, but the 2-feature floor kept it.
    FloorRetained,
}

/// Outcome of a selection run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Surviving features, canonical order.
    pub kept: Vec<String>,
    /// Per-feature drop annotations; floor-retained features appear here
    /// AND in `kept`.
    pub dropped: Vec<(String, DropReason)>,
}

/// Apply the two drop rules and the 2-feature floor.
///
/// Rule 1: any pair of surviving features with |r| >= `pair_threshold`
/// loses its later member (canonical order). Rule 2: survivors with
/// |r(feature, target)| < `target_min` are dropped. If fewer than 2
/// features remain, the dropped features with the highest target
/// correlation are re-added and tagged.
pub fn select_features(
    corr: &CorrelationMatrix,
    pair_threshold: f64,
    target_min: f64,
) -> SelectionResult {
    let d = corr.dim() - 1; // exclude target
    let mut alive = vec![true; d];
    let mut dropped: Vec<(String, DropReason)> = Vec::new();

    // Rule 1: only surviving earlier features kill later ones, which makes
    // the rule idempotent on its own output.
    for i in 0..d {
        if !alive[i] {
            continue;
        }
        for j in i + 1..d {
            if alive[j] && corr.at(i, j).abs() >= pair_threshold {
                alive[j] = false;
                dropped.push((corr.names[j].clone(), DropReason::PairwiseRedundant));
            }
        }
    }

    // Rule 2: survivors must correlate with the target.
    for i in 0..d {
        if alive[i] && corr.target_corr(i).abs() < target_min {
            alive[i] = false;
            dropped.push((corr.names[i].clone(), DropReason::LowTargetCorrelation));
        }
    }

    // Floor: keep at least two features, preferring target correlation.
    let mut kept_count = alive.iter().filter(|&&a| a).count();
    if kept_count < 2 {
        let mut candidates: Vec<usize> = (0..d).filter(|&i| !alive[i]).collect();
        candidates.sort_by(|&a, &b| {
            corr.target_corr(b)
                .abs()
                .partial_cmp(&corr.target_corr(a).abs())
                .unwrap()
                .then(a.cmp(&b))
        });
        for i in candidates {
            if kept_count >= 2 {
                break;
            }
            alive[i] = true;
            kept_count += 1;
            let name = &corr.names[i];
            for entry in dropped.iter_mut().filter(|(n, _)| n == name) {
                entry.1 = DropReason::FloorRetained;
            }
        }
    }

    let kept = (0..d).filter(|&i| alive[i]).map(|i| corr.names[i].clone()).collect();
    SelectionResult { kept, dropped }
}
