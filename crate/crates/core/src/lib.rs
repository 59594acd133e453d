//! Leaf disease classification from leaf photographs.
//!
//! The pipeline segments the leaf from its background (grayscale, Gaussian
//! smoothing, Otsu thresholding, morphological closing, largest-component
//! retention), extracts 15 shape/color/texture features per image, prunes
//! redundant features by correlation, and classifies with a from-scratch
//! random forest. One model is trained per plant.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`imaging`] — segmentation primitives
//! - [`features`] — the 15-feature extractor
//! - [`dataset`] — directory scanning, splits, feature cache I/O
//! - [`select`] — correlation-based feature selection
//! - [`forest`] — random forest training, prediction, persistence
//! - [`evaluate`] — hold-out metrics, k-fold CV, ROC/AUC
//! - [`report`] — CSV/JSON/SVG report bundles
//! - [`pipeline`] — end-to-end composition used by the CLI and service

pub mod dataset;
pub mod evaluate;
pub mod features;
pub mod forest;
pub mod imaging;
pub mod jsonfmt;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod select;
pub mod synth;
