//! From-scratch random forest classifier: CART trees grown on Gini
//! impurity, bootstrap resampling, random feature subsets per split, and
//! majority voting. Deterministic for a fixed seed regardless of thread
//! count, because every tree draws from its own derived RNG stream.

use crate::dataset::FeatureTable;
use crate::features::FeatureVector;
use crate::jsonfmt;
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("cannot compute impurity of an empty node")]
    EmptyNode,
    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),
    #[error("sample is missing feature {0:?}")]
    MissingFeature(String),
    #[error("unsupported model format version {0} (expected {MODEL_FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub const MODEL_FORMAT_VERSION: u32 = 1;
const LEAF: i32 = -1;

/// Array-encoded tree node. Leaves have `feature == -1`, nonempty
/// `class_counts`, and zeroed child links; internal nodes route samples
/// left iff `value <= threshold`. Children always sit at higher indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: i32,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub class_counts: Vec<u64>,
}

impl TreeNode {
    fn leaf(class_counts: Vec<u64>) -> Self {
        Self { feature: LEAF, threshold: 0.0, left: 0, right: 0, class_counts }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }
}

/// How many features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// floor(sqrt(d)) — the usual forest default.
    Sqrt,
    /// All features (degenerates the forest to bagged CART).
    All,
}

impl MaxFeatures {
    fn count(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).clamp(1, d),
            MaxFeatures::All => d,
        }
    }
}

/// Forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
            seed: 42,
        }
    }
}

/// Trained per-plant model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub plant: String,
    /// Class names; prediction indices refer to this order.
    pub labels: Vec<String>,
    /// Feature columns the trees were trained on, in column order.
    pub selected_features: Vec<String>,
    pub params: ForestParams,
    pub trees: Vec<Vec<TreeNode>>,
}

/// Gini impurity 1 - sum((c_i / n)^2).
pub fn gini(counts: &[u64]) -> Result<f64, ForestError> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(ForestError::EmptyNode);
    }
    let nf = n as f64;
    let mut acc = 1.0;
    for &c in counts {
        let p = c as f64 / nf;
        acc -= p * p;
    }
    Ok(acc)
}

/// A candidate split and its quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
    weighted_child_gini: f64,
}

/// Exhaustive best split over the candidate features, thresholds at
/// midpoints of consecutive distinct sorted values. Ties break toward the
/// lowest feature index, then the lowest threshold. Returns `None` when
/// the node is pure or nothing separates the samples.
pub fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    candidate_features: &[usize],
) -> Option<Split> {
    let n = y.len();
    if n < 2 {
        return None;
    }
    let mut total_counts = vec![0u64; n_classes];
    for &c in y {
        total_counts[c] += 1;
    }
    let parent_gini = gini(&total_counts).expect("node is nonempty");
    if parent_gini == 0.0 {
        return None; // pure node
    }

    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = (0..n).collect();

    let mut sorted_candidates = candidate_features.to_vec();
    sorted_candidates.sort_unstable();
    sorted_candidates.dedup();

    for &f in &sorted_candidates {
        order.sort_unstable_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).expect("finite features"));

        let mut left_counts = vec![0u64; n_classes];
        let mut right_counts = total_counts.clone();
        for cut in 1..n {
            let prev = order[cut - 1];
            left_counts[y[prev]] += 1;
            right_counts[y[prev]] -= 1;

            let (a, b) = (x[prev][f], x[order[cut]][f]);
            if a == b {
                continue; // not a boundary between distinct values
            }
            let threshold = (a + b) / 2.0;
            if threshold >= b {
                continue; // midpoint rounded onto b: split would be empty
            }
            let nl = cut as f64;
            let nr = (n - cut) as f64;
            let weighted = (nl * gini(&left_counts).unwrap() + nr * gini(&right_counts).unwrap())
                / n as f64;
            // Strict < plus ascending (feature, threshold) enumeration
            // implements the tie-break.
            if best.is_none_or(|s| weighted < s.weighted_child_gini) {
                best = Some(Split {
                    feature: f,
                    threshold,
                    impurity_decrease: parent_gini - weighted,
                    weighted_child_gini: weighted,
                });
            }
        }
    }
    best
}

fn class_counts(y: &[usize], n_classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_classes];
    for &c in y {
        counts[c] += 1;
    }
    counts
}

/// Grow one CART tree; the node array is preorder, so children always have
/// larger indices than their parent.
pub fn fit_tree(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
    rng: &mut impl Rng,
) -> Vec<TreeNode> {
    assert_eq!(x.len(), y.len());
    assert!(!y.is_empty(), "cannot fit a tree on zero samples");
    let d = x[0].len();
    let m = params.max_features.count(d);
    let mut nodes = Vec::new();
    let indices: Vec<usize> = (0..x.len()).collect();
    grow(x, y, n_classes, params, rng, &indices, 0, d, m, &mut nodes);
    nodes
}

#[allow(clippy::too_many_arguments)]
fn grow(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
    rng: &mut impl Rng,
    indices: &[usize],
    depth: usize,
    d: usize,
    m: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let node_y: Vec<usize> = indices.iter().map(|&i| y[i]).collect();
    let make_leaf = |nodes: &mut Vec<TreeNode>| {
        let id = nodes.len();
        nodes.push(TreeNode::leaf(class_counts(&node_y, n_classes)));
        id
    };

    if indices.len() < params.min_samples_split
        || params.max_depth.is_some_and(|limit| depth >= limit)
    {
        return make_leaf(nodes);
    }

    // Draw m distinct candidate features from this tree's stream. When all
    // features are candidates anyway the draw is skipped, so the grown tree
    // does not depend on RNG state.
    let candidates: Vec<usize> = if m >= d {
        (0..d).collect()
    } else {
        rand::seq::index::sample(rng, d, m).into_vec()
    };

    let node_x: Vec<Vec<f64>> = indices.iter().map(|&i| x[i].clone()).collect();
    let Some(split) = best_split(&node_x, &node_y, n_classes, &candidates) else {
        return make_leaf(nodes);
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .copied()
        .partition(|&i| x[i][split.feature] <= split.threshold);

    let id = nodes.len();
    nodes.push(TreeNode {
        feature: split.feature as i32,
        threshold: split.threshold,
        left: 0,
        right: 0,
        class_counts: Vec::new(),
    });
    let left = grow(x, y, n_classes, params, rng, &left_idx, depth + 1, d, m, nodes);
    let right = grow(x, y, n_classes, params, rng, &right_idx, depth + 1, d, m, nodes);
    nodes[id].left = left;
    nodes[id].right = right;
    id
}

/// Train a forest on a (already column-selected) feature table.
pub fn fit_forest(table: &FeatureTable, params: &ForestParams) -> Result<ForestModel, ForestError> {
    let n = table.len();
    let n_classes = table.labels.len();
    if n < 2 {
        return Err(ForestError::DegenerateTrainingSet(format!("{n} samples")));
    }
    if table.feature_names.is_empty() {
        return Err(ForestError::DegenerateTrainingSet("zero features".into()));
    }
    let distinct: std::collections::BTreeSet<usize> = table.y.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(ForestError::DegenerateTrainingSet("fewer than 2 classes present".into()));
    }

    // Per-tree seeds derive from (seed, tree index) alone, so the iteration
    // below can fan out across threads without changing the result.
    use rayon::prelude::*;
    let trees: Vec<Vec<TreeNode>> = (0..params.n_trees)
        .into_par_iter()
        .map(|k| {
            let mut tree_rng = rng::stream_rng(params.seed, k as u64);
            if params.bootstrap {
                let sample: Vec<usize> = (0..n).map(|_| tree_rng.random_range(0..n)).collect();
                let bx: Vec<Vec<f64>> = sample.iter().map(|&i| table.x[i].clone()).collect();
                let by: Vec<usize> = sample.iter().map(|&i| table.y[i]).collect();
                fit_tree(&bx, &by, n_classes, params, &mut tree_rng)
            } else {
                fit_tree(&table.x, &table.y, n_classes, params, &mut tree_rng)
            }
        })
        .collect();

    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        plant: table.plant.clone(),
        labels: table.labels.clone(),
        selected_features: table.feature_names.clone(),
        params: params.clone(),
        trees,
    })
}

/// One prediction with its vote breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label_index: usize,
    pub label: String,
    pub confidence: f64,
    pub votes: Vec<u64>,
}

impl ForestModel {
    fn tree_vote(&self, tree: &[TreeNode], sample: &[f64]) -> usize {
        let mut node = &tree[0];
        while !node.is_leaf() {
            let v = sample[node.feature as usize];
            node = if v <= node.threshold { &tree[node.left] } else { &tree[node.right] };
        }
        argmax(&node.class_counts)
    }

    /// Majority vote over trees; ties go to the lowest class index.
    pub fn predict(&self, sample: &[f64]) -> Result<Prediction, ForestError> {
        if sample.len() != self.selected_features.len() {
            return Err(ForestError::MissingFeature(format!(
                "expected {} values, got {}",
                self.selected_features.len(),
                sample.len()
            )));
        }
        let mut votes = vec![0u64; self.labels.len()];
        for tree in &self.trees {
            votes[self.tree_vote(tree, sample)] += 1;
        }
        let label_index = argmax(&votes);
        Ok(Prediction {
            label_index,
            label: self.labels[label_index].clone(),
            confidence: votes[label_index] as f64 / self.trees.len() as f64,
            votes,
        })
    }

    /// Predict from a full 15-feature vector by projecting onto the
    /// model's selected features.
    pub fn predict_vector(&self, v: &FeatureVector) -> Result<Prediction, ForestError> {
        let sample = self.project(v)?;
        self.predict(&sample)
    }

    /// Project a full feature vector onto the model's column order.
    pub fn project(&self, v: &FeatureVector) -> Result<Vec<f64>, ForestError> {
        self.selected_features
            .iter()
            .map(|name| v.value_by_name(name).ok_or_else(|| ForestError::MissingFeature(name.clone())))
            .collect()
    }

    /// Structural invariant check, run on every load.
    pub fn validate(&self) -> Result<(), ForestError> {
        let corrupt = |msg: String| Err(ForestError::CorruptModel(msg));
        if self.labels.is_empty() {
            return corrupt("no class labels".into());
        }
        if self.selected_features.is_empty() {
            return corrupt("no selected features".into());
        }
        if self.trees.len() != self.params.n_trees {
            return corrupt(format!(
                "tree count {} does not match params.n_trees {}",
                self.trees.len(),
                self.params.n_trees
            ));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.is_empty() {
                return corrupt(format!("tree {t} is empty"));
            }
            for (i, node) in tree.iter().enumerate() {
                if node.is_leaf() {
                    if node.class_counts.is_empty() {
                        return corrupt(format!("tree {t} leaf {i} has empty class_counts"));
                    }
                    if node.class_counts.len() != self.labels.len() {
                        return corrupt(format!("tree {t} leaf {i} class_counts arity mismatch"));
                    }
                    if node.class_counts.iter().all(|&c| c == 0) {
                        return corrupt(format!("tree {t} leaf {i} has all-zero class_counts"));
                    }
                } else {
                    if node.feature < 0 || node.feature as usize >= self.selected_features.len() {
                        return corrupt(format!("tree {t} node {i} feature index out of range"));
                    }
                    if !node.class_counts.is_empty() {
                        return corrupt(format!("tree {t} internal node {i} carries class_counts"));
                    }
                    if node.left <= i || node.right <= i {
                        return corrupt(format!("tree {t} node {i} child index not greater than parent"));
                    }
                    if node.left >= tree.len() || node.right >= tree.len() {
                        return corrupt(format!("tree {t} node {i} child index out of bounds"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn argmax(counts: &[u64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i; // strict > keeps the lowest index on ties
        }
    }
    best
}

/// Serialize the model as JSON with 17-significant-digit reals.
pub fn save_model(model: &ForestModel, path: &Path) -> Result<(), ForestError> {
    let json = jsonfmt::to_string(model).map_err(|e| ForestError::CorruptModel(e.to_string()))?;
    std::fs::write(path, json.as_bytes())
        .map_err(|e| ForestError::Io { path: path.to_path_buf(), source: e })
}

/// Load and validate a model file.
pub fn load_model(path: &Path) -> Result<ForestModel, ForestError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ForestError::Io { path: path.to_path_buf(), source: e })?;

    // Check the version before strict decoding so a newer format fails
    // with UnsupportedVersion rather than a parse error.
    let probe: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ForestError::CorruptModel(e.to_string()))?;
    let version = probe
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ForestError::CorruptModel("missing format_version".into()))?;
    if version != MODEL_FORMAT_VERSION as u64 {
        return Err(ForestError::UnsupportedVersion(version as u32));
    }

    let model: ForestModel =
        serde_json::from_str(&text).map_err(|e| ForestError::CorruptModel(e.to_string()))?;
    model.validate()?;
    Ok(model)
}
