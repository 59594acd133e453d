//! Dataset discovery, image decoding, deterministic splits, and the
//! on-disk feature cache.
//!
//! Datasets follow the PlantVillage layout: one directory per class named
//! `<Plant>___<Class>`, holding jpg/jpeg/png files. Anything else under the
//! root is skipped with a warning.

use crate::features::{FeatureVector, FEATURE_NAMES};
use crate::imaging::RasterImage;
use crate::jsonfmt;
use crate::rng;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset root not found: {0}")]
    RootNotFound(PathBuf),
    #[error("no class directories matching <Plant>___<Class> under {0}")]
    NoClassesFound(PathBuf),
    #[error("cannot decode image {path}: {reason}")]
    DecodeError { path: PathBuf, reason: String },
    #[error("test fraction must be in (0,1), got {0}")]
    InvalidFraction(f64),
    #[error("feature cache header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch { expected: String, found: String },
    #[error("malformed feature cache row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("unknown plant {0:?} (not present in the feature table)")]
    UnknownPlant(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

const CLASS_SEPARATOR: &str = "___";
const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

/// One discovered image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub image_path: PathBuf,
    pub plant: String,
    pub class_label: String,
}

impl DatasetEntry {
    /// Full class directory name, `<Plant>___<Class>`.
    pub fn full_label(&self) -> String {
        format!("{}{}{}", self.plant, CLASS_SEPARATOR, self.class_label)
    }
}

/// Index of a scanned dataset root.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    pub root_path: PathBuf,
    /// Sorted lexicographically by path.
    pub entries: Vec<DatasetEntry>,
    /// plant -> sorted class labels.
    pub plants: BTreeMap<String, Vec<String>>,
}

impl DatasetIndex {
    /// 0-based class index, lexicographic within the plant.
    pub fn label_id(&self, plant: &str, class_label: &str) -> Option<usize> {
        self.plants.get(plant)?.iter().position(|c| c == class_label)
    }
}

/// Scan a PlantVillage-style root into a deterministic index.
pub fn scan_dataset(root: &Path) -> Result<DatasetIndex, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::RootNotFound(root.to_path_buf()));
    }
    let mut entries = Vec::new();
    let mut plants: BTreeMap<String, Vec<String>> = BTreeMap::new();

    let read_dir = |p: &Path| {
        fs::read_dir(p).map_err(|e| DatasetError::Io { path: p.to_path_buf(), source: e })
    };

    let mut class_dirs = Vec::new();
    for entry in read_dir(root)? {
        let entry = entry.map_err(|e| DatasetError::Io { path: root.to_path_buf(), source: e })?;
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n.to_string(),
            None => continue,
        };
        match name.split_once(CLASS_SEPARATOR) {
            Some((plant, class)) if !plant.is_empty() && !class.is_empty() => {
                class_dirs.push((path, plant.to_string(), class.to_string()));
            }
            _ => {
                log::warn!("skipping directory without <Plant>___<Class> name: {}", path.display());
            }
        }
    }
    if class_dirs.is_empty() {
        return Err(DatasetError::NoClassesFound(root.to_path_buf()));
    }

    for (dir, plant, class) in &class_dirs {
        plants.entry(plant.clone()).or_default().push(class.clone());
        for entry in read_dir(dir)? {
            let entry = entry.map_err(|e| DatasetError::Io { path: dir.clone(), source: e })?;
            let path = entry.path();
            if !path.is_file() {
                continue;
            }
            let ext_ok = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
            if ext_ok {
                entries.push(DatasetEntry {
                    image_path: path,
                    plant: plant.clone(),
                    class_label: class.clone(),
                });
            }
        }
    }

    for classes in plants.values_mut() {
        classes.sort();
        classes.dedup();
    }
    entries.sort_by(|a, b| a.image_path.cmp(&b.image_path));
    Ok(DatasetIndex { root_path: root.to_path_buf(), entries, plants })
}

/// Decode an image file to 8-bit RGB, dropping any alpha channel.
pub fn load_image(path: &Path) -> Result<RasterImage, DatasetError> {
    let decoded = image::open(path).map_err(|e| DatasetError::DecodeError {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(raster_from_dynamic(decoded))
}

/// Decode in-memory image bytes (jpeg/png) to 8-bit RGB.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage, DatasetError> {
    let decoded = image::load_from_memory(bytes).map_err(|e| DatasetError::DecodeError {
        path: PathBuf::from("(request body)"),
        reason: e.to_string(),
    })?;
    Ok(raster_from_dynamic(decoded))
}

fn raster_from_dynamic(decoded: image::DynamicImage) -> RasterImage {
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width(), rgb.height());
    let pixels = rgb.pixels().map(|p| [p[0], p[1], p[2]]).collect();
    RasterImage::new(w, h, pixels)
}

/// Deterministic stratified train/test assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Per-class seeded shuffle then cut: each class contributes
/// floor(test_fraction * n_c) test samples (never all of them).
pub fn stratified_split(
    labels: &[usize],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitAssignment, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(test_fraction));
    }
    assert!(!labels.is_empty(), "labels must be nonempty");

    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (&class, indices) in &by_class {
        let mut shuffled = indices.clone();
        let mut class_rng = rng::stream_rng(seed, class as u64);
        shuffled.shuffle(&mut class_rng);
        let n = shuffled.len();
        let mut n_test = (test_fraction * n as f64).floor() as usize;
        n_test = n_test.min(n - 1); // always keep at least one training sample
        test.extend_from_slice(&shuffled[..n_test]);
        train.extend_from_slice(&shuffled[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitAssignment { train_indices: train, test_indices: test, seed, test_fraction })
}

/// One cached row: image path, full class directory name, 15 features.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheRow {
    pub image_path: String,
    pub label: String,
    pub features: FeatureVector,
}

/// In-memory form of the feature cache CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureCache {
    pub rows: Vec<CacheRow>,
}

/// Exact header line of the cache CSV.
pub fn cache_header() -> String {
    let mut s = String::from("image_path,label");
    for name in FEATURE_NAMES {
        write!(s, ",{name}").unwrap();
    }
    s
}

impl FeatureCache {
    /// Plants present in the cache, sorted.
    pub fn plants(&self) -> Vec<String> {
        let mut plants: Vec<String> = self
            .rows
            .iter()
            .filter_map(|r| r.label.split_once(CLASS_SEPARATOR).map(|(p, _)| p.to_string()))
            .collect();
        plants.sort();
        plants.dedup();
        plants
    }
}

/// Write the cache as CSV with 17-significant-digit reals.
pub fn write_feature_cache(cache: &FeatureCache, path: &Path) -> Result<(), DatasetError> {
    let io_err = |e| DatasetError::Io { path: path.to_path_buf(), source: e };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(file);
    let header: Vec<String> = cache_header().split(',').map(str::to_string).collect();
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    for row in &cache.rows {
        let mut record = vec![row.image_path.clone(), row.label.clone()];
        record.extend(row.features.values().iter().map(|&v| jsonfmt::fmt_f64(v)));
        w.write_record(&record).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

fn csv_io(path: &Path, e: csv::Error) -> DatasetError {
    DatasetError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Read a cache CSV, validating the header verbatim and every row's arity
/// and numeric fields.
pub fn read_feature_cache(path: &Path) -> Result<FeatureCache, DatasetError> {
    let io_err = |e| DatasetError::Io { path: path.to_path_buf(), source: e };
    let file = fs::File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| DatasetError::MalformedRow { line, reason: e.to_string() })?;
        if line == 1 {
            let found = record.iter().collect::<Vec<_>>().join(",");
            let expected = cache_header();
            if found != expected {
                return Err(DatasetError::HeaderMismatch { expected, found });
            }
            continue;
        }
        if record.len() != 2 + FEATURE_NAMES.len() {
            return Err(DatasetError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", 2 + FEATURE_NAMES.len(), record.len()),
            });
        }
        let mut values = [0.0f64; 15];
        for (k, v) in values.iter_mut().enumerate() {
            let field = &record[k + 2];
            *v = field.parse().map_err(|_| DatasetError::MalformedRow {
                line,
                reason: format!("non-numeric feature {:?} in column {}", field, FEATURE_NAMES[k]),
            })?;
        }
        rows.push(CacheRow {
            image_path: record[0].to_string(),
            label: record[1].to_string(),
            features: FeatureVector::from_values(values),
        });
    }
    Ok(FeatureCache { rows })
}

/// Labeled per-plant feature matrix, the classifier's input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub plant: String,
    /// Sorted class names for this plant; `y` indexes into this list.
    pub labels: Vec<String>,
    pub feature_names: Vec<String>,
    /// Row-major samples, one row per image.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl FeatureTable {
    /// Extract one plant's rows from a cache, with lexicographic class ids.
    pub fn from_cache(cache: &FeatureCache, plant: &str) -> Result<Self, DatasetError> {
        let mut class_names: Vec<String> = Vec::new();
        let mut picked: Vec<(&CacheRow, String)> = Vec::new();
        for row in &cache.rows {
            if let Some((p, class)) = row.label.split_once(CLASS_SEPARATOR) {
                if p == plant {
                    class_names.push(class.to_string());
                    picked.push((row, class.to_string()));
                }
            }
        }
        if picked.is_empty() {
            return Err(DatasetError::UnknownPlant(plant.to_string()));
        }
        class_names.sort();
        class_names.dedup();

        let mut x = Vec::with_capacity(picked.len());
        let mut y = Vec::with_capacity(picked.len());
        for (row, class) in picked {
            x.push(row.features.values().to_vec());
            y.push(class_names.iter().position(|c| *c == class).unwrap());
        }
        Ok(Self {
            plant: plant.to_string(),
            labels: class_names,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            x,
            y,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Project onto a subset of feature columns, by name.
    pub fn select_columns(&self, names: &[String]) -> Self {
        let cols: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .unwrap_or_else(|| panic!("unknown feature column {n:?}"))
            })
            .collect();
        Self {
            plant: self.plant.clone(),
            labels: self.labels.clone(),
            feature_names: names.to_vec(),
            x: self.x.iter().map(|row| cols.iter().map(|&c| row[c]).collect()).collect(),
            y: self.y.clone(),
        }
    }

    /// Subset of rows by index.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            plant: self.plant.clone(),
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

/// Read not via csv but line-oriented: used by tests to corrupt files.
#[doc(hidden)]
pub fn read_cache_lines(path: &Path) -> Result<Vec<String>, DatasetError> {
    let file = fs::File::open(path).map_err(|e| DatasetError::Io { path: path.to_path_buf(), source: e })?;
    BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| DatasetError::Io { path: path.to_path_buf(), source: e })
}

#[doc(hidden)]
pub fn write_cache_lines(path: &Path, lines: &[String]) -> Result<(), DatasetError> {
    let mut file = fs::File::create(path).map_err(|e| DatasetError::Io { path: path.to_path_buf(), source: e })?;
    for line in lines {
        writeln!(file, "{line}").map_err(|e| DatasetError::Io { path: path.to_path_buf(), source: e })?;
    }
    Ok(())
}
