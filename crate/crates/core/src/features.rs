//! The 15 per-image features: shape (area, perimeter), color (per-channel
//! mean/std, green ratio), and five GLCM texture descriptors.

use crate::imaging::{
    rgb_to_hsv, segment_foreground, to_grayscale, BitMask, GrayImage, ImagingError, RasterImage,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("mask has no foreground pixels")]
    EmptyForeground,
}

impl From<ImagingError> for FeatureError {
    fn from(e: ImagingError) -> Self {
        match e {
            ImagingError::EmptyForeground => FeatureError::EmptyForeground,
            ImagingError::InvalidSigma(_) => unreachable!("segmentation uses a fixed valid sigma"),
        }
    }
}

/// Canonical feature order — the single source of truth for every column
/// layout downstream (cache header, correlation matrix, model inputs).
pub const FEATURE_NAMES: [&str; 15] = [
    "area",
    "perimeter",
    "mean_r",
    "mean_g",
    "mean_b",
    "std_r",
    "std_g",
    "std_b",
    "green_ratio",
    "non_green_ratio",
    "glcm_contrast",
    "glcm_dissimilarity",
    "glcm_homogeneity",
    "glcm_energy",
    "glcm_correlation",
];

/// Hue band (half-degrees) counted as green.
pub const GREEN_HUE_BAND: (u8, u8) = (30, 70);

/// One image's features, fields in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub area: f64,
    pub perimeter: f64,
    pub mean_r: f64,
    pub mean_g: f64,
    pub mean_b: f64,
    pub std_r: f64,
    pub std_g: f64,
    pub std_b: f64,
    pub green_ratio: f64,
    pub non_green_ratio: f64,
    pub glcm_contrast: f64,
    pub glcm_dissimilarity: f64,
    pub glcm_homogeneity: f64,
    pub glcm_energy: f64,
    pub glcm_correlation: f64,
}

impl FeatureVector {
    /// Values in canonical order.
    pub fn values(&self) -> [f64; 15] {
        [
            self.area,
            self.perimeter,
            self.mean_r,
            self.mean_g,
            self.mean_b,
            self.std_r,
            self.std_g,
            self.std_b,
            self.green_ratio,
            self.non_green_ratio,
            self.glcm_contrast,
            self.glcm_dissimilarity,
            self.glcm_homogeneity,
            self.glcm_energy,
            self.glcm_correlation,
        ]
    }

    pub fn from_values(v: [f64; 15]) -> Self {
        Self {
            area: v[0],
            perimeter: v[1],
            mean_r: v[2],
            mean_g: v[3],
            mean_b: v[4],
            std_r: v[5],
            std_g: v[6],
            std_b: v[7],
            green_ratio: v[8],
            non_green_ratio: v[9],
            glcm_contrast: v[10],
            glcm_dissimilarity: v[11],
            glcm_homogeneity: v[12],
            glcm_energy: v[13],
            glcm_correlation: v[14],
        }
    }

    pub fn value_by_name(&self, name: &str) -> Option<f64> {
        let i = FEATURE_NAMES.iter().position(|&n| n == name)?;
        Some(self.values()[i])
    }
}

/// Area (pixel count) and perimeter (Moore boundary walk length) of the
/// foreground component. A single pixel has perimeter 0.
pub fn extract_shape(mask: &BitMask) -> Result<(f64, f64), FeatureError> {
    let area = mask.count_ones();
    if area == 0 {
        return Err(FeatureError::EmptyForeground);
    }
    Ok((area as f64, trace_perimeter(mask)))
}

/// 8-neighborhood in clockwise order starting west (image coords: y down).
const MOORE: [(i64, i64); 8] = [
    (-1, 0),  // W
    (-1, -1), // NW
    (0, -1),  // N
    (1, -1),  // NE
    (1, 0),   // E
    (1, 1),   // SE
    (0, 1),   // S
    (-1, 1),  // SW
];

fn step_len(dir: usize) -> f64 {
    let (dx, dy) = MOORE[dir];
    if dx != 0 && dy != 0 {
        std::f64::consts::SQRT_2
    } else {
        1.0
    }
}

/// Moore-neighbor contour tracing from the topmost-leftmost foreground
/// pixel; terminates when the walk re-enters the start with its first move.
fn trace_perimeter(mask: &BitMask) -> f64 {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let at = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && mask.get(x as u32, y as u32);

    let start_idx = mask.bits().iter().position(|&b| b).expect("nonempty mask");
    let start = ((start_idx as i64) % w, (start_idx as i64) / w);

    // Scan clockwise beginning just after the backtrack direction; return
    // the move direction and the backtrack direction seen from the new pixel.
    let next_move = |p: (i64, i64), backtrack: usize| -> Option<(usize, usize)> {
        for k in 1..=8 {
            let dir = (backtrack + k) % 8;
            let q = (p.0 + MOORE[dir].0, p.1 + MOORE[dir].1);
            if at(q.0, q.1) {
                let prev = MOORE[(backtrack + k - 1) % 8];
                let bg = (p.0 + prev.0, p.1 + prev.1);
                let delta = (bg.0 - q.0, bg.1 - q.1);
                let new_backtrack = MOORE.iter().position(|&d| d == delta).expect("ring cells are adjacent");
                return Some((dir, new_backtrack));
            }
        }
        None
    };

    // Start is topmost-leftmost, so its west neighbor is background.
    let backtrack0 = 0;
    let Some((first_dir, mut backtrack)) = next_move(start, backtrack0) else {
        return 0.0; // isolated pixel
    };

    let mut perimeter = step_len(first_dir);
    let mut p = (start.0 + MOORE[first_dir].0, start.1 + MOORE[first_dir].1);
    let cap = 8 * mask.count_ones() + 8;
    for _ in 0..cap {
        let (dir, new_backtrack) = next_move(p, backtrack).expect("walk cannot dead-end");
        if p == start && dir == first_dir {
            return perimeter; // closed the contour
        }
        perimeter += step_len(dir);
        p = (p.0 + MOORE[dir].0, p.1 + MOORE[dir].1);
        backtrack = new_backtrack;
    }
    unreachable!("contour walk exceeded its step bound");
}

/// Per-channel mean/std over foreground pixels, plus the green pixel ratio
/// over the whole image (background is black and never counts as green).
pub fn extract_color(
    img: &RasterImage,
    mask: &BitMask,
) -> Result<([f64; 3], [f64; 3], f64, f64), FeatureError> {
    let n = mask.count_ones();
    if n == 0 {
        return Err(FeatureError::EmptyForeground);
    }

    let mut sums = [0.0f64; 3];
    let mut green = 0usize;
    for (px, &m) in img.pixels().iter().zip(mask.bits()) {
        if m {
            for c in 0..3 {
                sums[c] += px[c] as f64;
            }
        }
        let (h, _, _) = rgb_to_hsv(*px);
        if h >= GREEN_HUE_BAND.0 && h <= GREEN_HUE_BAND.1 {
            green += 1;
        }
    }
    let nf = n as f64;
    let means = [sums[0] / nf, sums[1] / nf, sums[2] / nf];

    let mut sq = [0.0f64; 3];
    for (px, &m) in img.pixels().iter().zip(mask.bits()) {
        if m {
            for c in 0..3 {
                let d = px[c] as f64 - means[c];
                sq[c] += d * d;
            }
        }
    }
    let stds = [(sq[0] / nf).sqrt(), (sq[1] / nf).sqrt(), (sq[2] / nf).sqrt()];

    let green_ratio = green as f64 / img.pixels().len() as f64;
    let non_green_ratio = 1.0 - green_ratio;
    Ok((means, stds, green_ratio, non_green_ratio))
}

/// Normalized symmetric gray-level co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    p: Vec<f64>,
}

impl Glcm {
    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.p
    }

    /// Build directly from a normalized (or zero) matrix, row-major.
    pub fn from_entries(levels: usize, p: Vec<f64>) -> Self {
        assert_eq!(p.len(), levels * levels);
        Self { levels, p }
    }
}

/// Default GLCM pixel offset: one step right.
pub const GLCM_OFFSET: (i32, i32) = (1, 0);

/// Co-occurrence counts of gray-level pairs at `offset`, restricted to
/// pairs where both pixels are foreground, accumulated symmetrically and
/// normalized. Gray values must already be below `levels` (identity
/// quantization at 256). No valid pairs yields the zero matrix.
pub fn compute_glcm(gray: &GrayImage, mask: &BitMask, levels: usize, offset: (i32, i32)) -> Glcm {
    assert!(levels >= 2, "glcm needs at least 2 levels");
    let (w, h) = (gray.width() as i64, gray.height() as i64);
    let (dx, dy) = (offset.0 as i64, offset.1 as i64);

    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    for y in 0..h {
        for x in 0..w {
            let (x2, y2) = (x + dx, y + dy);
            if x2 < 0 || y2 < 0 || x2 >= w || y2 >= h {
                continue;
            }
            if !mask.get(x as u32, y as u32) || !mask.get(x2 as u32, y2 as u32) {
                continue;
            }
            let i = gray.get(x as u32, y as u32) as usize;
            let j = gray.get(x2 as u32, y2 as u32) as usize;
            assert!(i < levels && j < levels, "gray value {} exceeds {levels} levels", i.max(j));
            counts[i * levels + j] += 1;
            counts[j * levels + i] += 1;
            total += 2;
        }
    }

    let p = if total == 0 {
        vec![0.0; levels * levels]
    } else {
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    };
    Glcm { levels, p }
}

/// The five texture descriptors computed from a GLCM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaralickFeatures {
    pub contrast: f64,
    pub dissimilarity: f64,
    pub homogeneity: f64,
    pub energy: f64,
    pub correlation: f64,
}

/// Contrast, dissimilarity, homogeneity, energy (sqrt of angular second
/// moment), and correlation. A zero matrix maps to all zeros; a degenerate
/// single-level distribution has correlation 1 by convention.
pub fn haralick(glcm: &Glcm) -> HaralickFeatures {
    let n = glcm.levels();
    let total: f64 = glcm.entries().iter().sum();
    if total == 0.0 {
        return HaralickFeatures {
            contrast: 0.0,
            dissimilarity: 0.0,
            homogeneity: 0.0,
            energy: 0.0,
            correlation: 0.0,
        };
    }

    let mut contrast = 0.0;
    let mut dissimilarity = 0.0;
    let mut homogeneity = 0.0;
    let mut asm = 0.0;
    let mut mu_i = 0.0;
    let mut mu_j = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = glcm.at(i, j);
            let d = i as f64 - j as f64;
            contrast += p * d * d;
            dissimilarity += p * d.abs();
            homogeneity += p / (1.0 + d * d);
            asm += p * p;
            mu_i += i as f64 * p;
            mu_j += j as f64 * p;
        }
    }

    let mut var_i = 0.0;
    let mut var_j = 0.0;
    let mut cov = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = glcm.at(i, j);
            var_i += (i as f64 - mu_i) * (i as f64 - mu_i) * p;
            var_j += (j as f64 - mu_j) * (j as f64 - mu_j) * p;
            cov += (i as f64 - mu_i) * (j as f64 - mu_j) * p;
        }
    }
    let sigma = var_i.sqrt() * var_j.sqrt();
    let correlation = if sigma == 0.0 { 1.0 } else { cov / sigma };

    HaralickFeatures {
        contrast,
        dissimilarity,
        homogeneity,
        energy: asm.sqrt(),
        correlation,
    }
}

/// Run the full chain on one image: segment, then shape + color + texture.
pub fn extract_feature_vector(img: &RasterImage) -> Result<FeatureVector, FeatureError> {
    let (segmented, mask) = segment_foreground(img)?;
    let (area, perimeter) = extract_shape(&mask)?;
    let (means, stds, green_ratio, non_green_ratio) = extract_color(&segmented, &mask)?;
    let gray = to_grayscale(&segmented);
    let glcm = compute_glcm(&gray, &mask, 256, GLCM_OFFSET);
    let tex = haralick(&glcm);

    Ok(FeatureVector {
        area,
        perimeter,
        mean_r: means[0],
        mean_g: means[1],
        mean_b: means[2],
        std_r: stds[0],
        std_g: stds[1],
        std_b: stds[2],
        green_ratio,
        non_green_ratio,
        glcm_contrast: tex.contrast,
        glcm_dissimilarity: tex.dissimilarity,
        glcm_homogeneity: tex.homogeneity,
        glcm_energy: tex.energy,
        glcm_correlation: tex.correlation,
    })
}
