//! Segmentation primitives: grayscale, Gaussian smoothing, Otsu
//! thresholding, binary morphology, connected components, and HSV
//! conversion.
//!
//! All operations are pure; images are plain row-major buffers.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImagingError {
    #[error("gaussian sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("segmentation produced an empty foreground mask")]
    EmptyForeground,
}

/// Decoded 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Self {
        assert!(width >= 1 && height >= 1, "image must be at least 1x1");
        assert_eq!(pixels.len(), (width * height) as usize, "pixel buffer size mismatch");
        Self { width, height, pixels }
    }

    /// Constant-color image, mostly useful in tests.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self::new(width, height, vec![rgb; (width * height) as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        self.pixels[(y * self.width + x) as usize] = rgb;
    }
}

/// Single-channel 8-bit image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "image must be at least 1x1");
        assert_eq!(pixels.len(), (width * height) as usize, "pixel buffer size mismatch");
        Self { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }
}

/// Binary foreground map; `true` marks leaf pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "mask must be at least 1x1");
        assert_eq!(bits.len(), (width * height) as usize, "bit buffer size mismatch");
        Self { width, height, bits }
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::new(width, height, vec![false; (width * height) as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[(y * self.width + x) as usize] = v;
    }

    /// Number of foreground pixels.
    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Convert RGB to luma with the 0.299/0.587/0.114 weights.
pub fn to_grayscale(img: &RasterImage) -> GrayImage {
    let pixels = img
        .pixels
        .iter()
        .map(|&[r, g, b]| {
            let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(img.width, img.height, pixels)
}

/// 5-tap normalized Gaussian kernel for the given sigma.
fn gaussian_kernel5(sigma: f64) -> [f64; 5] {
    let mut k = [0.0; 5];
    for (i, w) in k.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *w = (-(d * d) / (2.0 * sigma * sigma)).exp();
    }
    let sum: f64 = k.iter().sum();
    for w in &mut k {
        *w /= sum;
    }
    k
}

/// Separable 5x5 Gaussian smoothing with replicated borders.
///
/// Both passes run in f64; the result is rounded once at the end.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage, ImagingError> {
    if !(sigma > 0.0) {
        return Err(ImagingError::InvalidSigma(sigma));
    }
    let kernel = gaussian_kernel5(sigma);
    let (w, h) = (img.width as i64, img.height as i64);

    // Horizontal pass.
    let mut tmp = vec![0.0f64; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, wt) in kernel.iter().enumerate() {
                let sx = (x + i as i64 - 2).clamp(0, w - 1);
                acc += wt * img.get(sx as u32, y as u32) as f64;
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }

    // Vertical pass, rounded to u8.
    let mut out = vec![0u8; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, wt) in kernel.iter().enumerate() {
                let sy = (y + i as i64 - 2).clamp(0, h - 1);
                acc += wt * tmp[(sy * w + x) as usize];
            }
            out[(y * w + x) as usize] = acc.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(GrayImage::new(img.width, img.height, out))
}

/// Between-class variance for a candidate threshold, from exact integer
/// class counts and intensity sums. Empty classes score 0.
#[inline]
pub fn between_class_variance(n0: u64, s0: u64, n1: u64, s1: u64) -> f64 {
    if n0 == 0 || n1 == 0 {
        return 0.0;
    }
    let n = (n0 + n1) as f64;
    let w0 = n0 as f64 / n;
    let w1 = n1 as f64 / n;
    let mu0 = s0 as f64 / n0 as f64;
    let mu1 = s1 as f64 / n1 as f64;
    w0 * w1 * (mu1 - mu0) * (mu1 - mu0)
}

/// Otsu's threshold: the smallest t in [0,255] maximizing between-class
/// variance, with class 0 = pixels <= t and class 1 = pixels > t.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    let mut hist = [0u64; 256];
    for &v in &img.pixels {
        hist[v as usize] += 1;
    }
    let total_n: u64 = img.pixels.len() as u64;
    let total_s: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();

    let mut best_t = 0u8;
    let mut best_var = -1.0f64;
    let mut n0 = 0u64;
    let mut s0 = 0u64;
    for t in 0..=255u16 {
        n0 += hist[t as usize];
        s0 += t as u64 * hist[t as usize];
        let var = between_class_variance(n0, s0, total_n - n0, total_s - s0);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    best_t
}

/// Threshold into a foreground mask.
///
/// Both polarities are candidates: A = {pixels > t}, B = {pixels <= t}.
/// The class with fewer border-touching pixels becomes the foreground
/// (leaves are centered, backgrounds reach the image edge); ties pick A.
pub fn binarize(img: &GrayImage, t: u8) -> BitMask {
    let (w, h) = (img.width, img.height);
    let mut border_a = 0usize;
    let mut border_total = 0usize;
    let mut on_border = |x: u32, y: u32| {
        border_total += 1;
        if img.get(x, y) > t {
            border_a += 1;
        }
    };
    for x in 0..w {
        on_border(x, 0);
        if h > 1 {
            on_border(x, h - 1);
        }
    }
    for y in 1..h.saturating_sub(1) {
        on_border(0, y);
        if w > 1 {
            on_border(w - 1, y);
        }
    }
    let border_b = border_total - border_a;
    let a_is_foreground = border_a <= border_b;

    let bits = img
        .pixels
        .iter()
        .map(|&v| (v > t) == a_is_foreground)
        .collect();
    BitMask::new(w, h, bits)
}

const CLOSE_RADIUS: i64 = 2; // 5x5 square structuring element

/// Morphological closing (dilation then erosion) with a 5x5 square element.
///
/// Dilation treats pixels outside the image as background; erosion only
/// requires in-image window pixels to be set, so a mask reaching the image
/// edge is not eaten away (the usual convention, and the one under which a
/// one-pixel checkerboard closes to full foreground).
pub fn morph_close(mask: &BitMask) -> BitMask {
    let dilated = dilate(mask, CLOSE_RADIUS);
    erode(&dilated, CLOSE_RADIUS)
}

fn dilate(mask: &BitMask, r: i64) -> BitMask {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut out = BitMask::empty(mask.width, mask.height);
    for y in 0..h {
        for x in 0..w {
            'search: for dy in -r..=r {
                for dx in -r..=r {
                    let (sx, sy) = (x + dx, y + dy);
                    if sx >= 0 && sx < w && sy >= 0 && sy < h && mask.get(sx as u32, sy as u32) {
                        out.set(x as u32, y as u32, true);
                        break 'search;
                    }
                }
            }
        }
    }
    out
}

fn erode(mask: &BitMask, r: i64) -> BitMask {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut out = BitMask::empty(mask.width, mask.height);
    for y in 0..h {
        for x in 0..w {
            let mut all = true;
            'search: for dy in -r..=r {
                for dx in -r..=r {
                    let (sx, sy) = (x + dx, y + dy);
                    if sx >= 0 && sx < w && sy >= 0 && sy < h && !mask.get(sx as u32, sy as u32) {
                        all = false;
                        break 'search;
                    }
                }
            }
            out.set(x as u32, y as u32, all);
        }
    }
    out
}

/// Keep only the largest 8-connected foreground component.
///
/// Equal sizes break toward the component whose first pixel comes first in
/// row-major order. Returns `None` for an empty mask.
pub fn largest_component(mask: &BitMask) -> Option<BitMask> {
    let (w, h) = (mask.width, mask.height);
    let n = (w * h) as usize;
    let mut visited = vec![false; n];
    let mut best: Option<Vec<u32>> = None;

    let idx = |x: u32, y: u32| (y * w + x) as usize;
    for start in 0..n as u32 {
        if !mask.bits[start as usize] || visited[start as usize] {
            continue;
        }
        let mut stack = vec![start];
        let mut pixels = Vec::new();
        visited[start as usize] = true;
        while let Some(p) = stack.pop() {
            pixels.push(p);
            let (x, y) = (p % w, p / w);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let q = idx(nx as u32, ny as u32);
                    if mask.bits[q] && !visited[q] {
                        visited[q] = true;
                        stack.push(q as u32);
                    }
                }
            }
        }
        // Strict > keeps the earlier component on size ties: components are
        // discovered in row-major order of their first pixel.
        if best.as_ref().is_none_or(|b| pixels.len() > b.len()) {
            best = Some(pixels);
        }
    }

    best.map(|pixels| {
        let mut out = BitMask::empty(w, h);
        for p in pixels {
            out.bits[p as usize] = true;
        }
        out
    })
}

/// Full segmentation chain: grayscale, Gaussian blur, Otsu, binarize,
/// close, largest component, then black out the background.
pub fn segment_foreground(img: &RasterImage) -> Result<(RasterImage, BitMask), ImagingError> {
    let gray = to_grayscale(img);
    let blurred = gaussian_blur(&gray, 1.0).expect("default sigma is valid");
    let t = otsu_threshold(&blurred);
    let mask = morph_close(&binarize(&blurred, t));
    let mask = largest_component(&mask).ok_or(ImagingError::EmptyForeground)?;

    let mut segmented = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            if !mask.get(x, y) {
                segmented.set(x, y, [0, 0, 0]);
            }
        }
    }
    Ok((segmented, mask))
}

/// RGB to HSV with hue in half-degrees [0,180), s and v in [0,255].
///
/// Achromatic pixels get h = 0, s = 0. On this scale the green band used by
/// the color features is hue 30..=70.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (u8, u8, u8) {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let v = max;
    if max == min {
        return (0, 0, v);
    }
    let delta = (max - min) as f64;
    let s = (255.0 * delta / max as f64).round() as u8;

    let (rf, gf, bf) = (r as f64, g as f64, b as f64);
    let mut hue = if max == r {
        60.0 * (gf - bf) / delta
    } else if max == g {
        60.0 * (bf - rf) / delta + 120.0
    } else {
        60.0 * (rf - gf) / delta + 240.0
    };
    if hue < 0.0 {
        hue += 360.0;
    }
    let h = ((hue / 2.0).round() as u32) % 180;
    (h as u8, s, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray_from_rows(rows: &[&[u8]]) -> GrayImage {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        GrayImage::new(w, h, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    fn mask_from_rows(rows: &[&[u8]]) -> BitMask {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        BitMask::new(w, h, rows.iter().flat_map(|r| r.iter().map(|&v| v != 0)).collect())
    }

    #[test]
    fn grayscale_constant_stays_constant() {
        let img = RasterImage::filled(4, 3, [100, 100, 100]);
        let gray = to_grayscale(&img);
        assert!(gray.pixels().iter().all(|&v| v == 100));
    }

    #[test]
    fn grayscale_pure_green() {
        let img = RasterImage::filled(1, 1, [0, 255, 0]);
        assert_eq!(to_grayscale(&img).get(0, 0), 150); // round(0.587 * 255)
    }

    #[test]
    fn grayscale_white_is_white() {
        let img = RasterImage::filled(2, 2, [255, 255, 255]);
        assert!(to_grayscale(&img).pixels().iter().all(|&v| v == 255));
    }

    #[test]
    fn blur_preserves_constants() {
        let img = GrayImage::new(7, 7, vec![93; 49]);
        let out = gaussian_blur(&img, 1.0).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn blur_rejects_nonpositive_sigma() {
        let img = GrayImage::new(3, 3, vec![0; 9]);
        assert_eq!(gaussian_blur(&img, 0.0), Err(ImagingError::InvalidSigma(0.0)));
        assert_eq!(gaussian_blur(&img, -1.0), Err(ImagingError::InvalidSigma(-1.0)));
    }

    /// Dense 2D convolution oracle with replicated borders.
    fn dense_blur(img: &GrayImage, kernel2d: &[Vec<f64>]) -> Vec<f64> {
        let r = (kernel2d.len() / 2) as i64;
        let (w, h) = (img.width() as i64, img.height() as i64);
        let mut out = vec![0.0; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for ky in -r..=r {
                    for kx in -r..=r {
                        let sx = (x + kx).clamp(0, w - 1) as u32;
                        let sy = (y + ky).clamp(0, h - 1) as u32;
                        acc += kernel2d[(ky + r) as usize][(kx + r) as usize]
                            * img.get(sx, sy) as f64;
                    }
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        out
    }

    fn outer(k: &[f64]) -> Vec<Vec<f64>> {
        k.iter().map(|&a| k.iter().map(|&b| a * b).collect()).collect()
    }

    #[test]
    fn blur_impulse_center_matches_dense_oracle() {
        let mut pixels = vec![0u8; 81];
        pixels[4 * 9 + 4] = 255;
        let img = GrayImage::new(9, 9, pixels);
        let out = gaussian_blur(&img, 1.0).unwrap();

        let k2 = outer(&gaussian_kernel5(1.0));
        let expect = dense_blur(&img, &k2);
        for (i, &e) in expect.iter().enumerate() {
            assert_eq!(out.pixels()[i] as f64, e.round(), "pixel {i}");
        }
        // Center of the impulse response is 255 * w00.
        assert_eq!(out.get(4, 4) as f64, (255.0 * k2[2][2]).round());
    }

    #[test]
    fn blur_twice_matches_composed_kernel_within_one_level() {
        // Compose the separable 5-tap kernel with itself into a 9-tap kernel,
        // then compare on pixels whose 9x9 window stays inside the image.
        let mut rng_state = 0x1234_5678u32;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(1664525).wrapping_add(1013904223);
            (rng_state >> 24) as u8
        };
        let img = GrayImage::new(16, 16, (0..256).map(|_| next()).collect());

        let twice = gaussian_blur(&gaussian_blur(&img, 1.0).unwrap(), 1.0).unwrap();

        let k5 = gaussian_kernel5(1.0);
        let mut k9 = [0.0f64; 9];
        for (i, a) in k5.iter().enumerate() {
            for (j, b) in k5.iter().enumerate() {
                k9[i + j] += a * b;
            }
        }
        let k9_2d: Vec<Vec<f64>> = k9.iter().map(|&a| k9.iter().map(|&b| a * b).collect()).collect();
        let composed = dense_blur(&img, &k9_2d);

        for y in 4..12u32 {
            for x in 4..12u32 {
                let got = twice.get(x, y) as f64;
                let want = composed[(y * 16 + x) as usize].round();
                assert!((got - want).abs() <= 1.0, "({x},{y}): {got} vs {want}");
            }
        }
    }

    /// Brute-force Otsu: recompute class statistics from scratch per t.
    fn otsu_brute_force(img: &GrayImage) -> u8 {
        let mut best_t = 0u8;
        let mut best_var = -1.0f64;
        for t in 0..=255u16 {
            let (mut n0, mut s0, mut n1, mut s1) = (0u64, 0u64, 0u64, 0u64);
            for &v in img.pixels() {
                if v as u16 <= t {
                    n0 += 1;
                    s0 += v as u64;
                } else {
                    n1 += 1;
                    s1 += v as u64;
                }
            }
            let var = between_class_variance(n0, s0, n1, s1);
            if var > best_var {
                best_var = var;
                best_t = t as u8;
            }
        }
        best_t
    }

    #[test]
    fn otsu_two_spike_histogram() {
        let img = GrayImage::new(6, 1, vec![0, 0, 0, 0, 255, 255]);
        assert_eq!(otsu_threshold(&img), 0);
        assert_eq!(otsu_brute_force(&img), 0);
    }

    #[test]
    fn otsu_three_level_plateau_picks_smallest() {
        let img = GrayImage::new(6, 1, vec![50, 50, 100, 100, 200, 200]);
        assert_eq!(otsu_threshold(&img), 100);
        assert_eq!(otsu_brute_force(&img), 100);
    }

    #[test]
    fn otsu_constant_image_returns_zero() {
        let img = GrayImage::new(3, 3, vec![7; 9]);
        assert_eq!(otsu_threshold(&img), 0);
    }

    proptest! {
        #[test]
        fn otsu_matches_brute_force(pixels in proptest::collection::vec(any::<u8>(), 64)) {
            let img = GrayImage::new(8, 8, pixels);
            prop_assert_eq!(otsu_threshold(&img), otsu_brute_force(&img));
        }

        #[test]
        fn binarize_partitions_pixels(pixels in proptest::collection::vec(any::<u8>(), 36), t in any::<u8>()) {
            let img = GrayImage::new(6, 6, pixels);
            let mask = binarize(&img, t);
            // Exactly one polarity chosen: mask bit equals (v > t) everywhere
            // or equals (v <= t) everywhere.
            let as_a = img.pixels().iter().zip(mask.bits()).all(|(&v, &m)| m == (v > t));
            let as_b = img.pixels().iter().zip(mask.bits()).all(|(&v, &m)| m == (v <= t));
            prop_assert!(as_a || as_b);
        }

        #[test]
        fn close_is_idempotent(bits in proptest::collection::vec(any::<bool>(), 100)) {
            let mask = BitMask::new(10, 10, bits);
            let once = morph_close(&mask);
            prop_assert_eq!(morph_close(&once), once);
        }

        #[test]
        fn hsv_hue_in_range_and_v_is_max(rgb in any::<[u8; 3]>()) {
            let (h, _s, v) = rgb_to_hsv(rgb);
            prop_assert!(h < 180);
            prop_assert_eq!(v, rgb[0].max(rgb[1]).max(rgb[2]));
        }
    }

    #[test]
    fn binarize_selects_centered_blob() {
        let img = gray_from_rows(&[
            &[10, 10, 10, 10, 10, 10, 10, 10],
            &[10, 10, 10, 10, 10, 10, 10, 10],
            &[10, 10, 200, 200, 200, 200, 10, 10],
            &[10, 10, 200, 200, 200, 200, 10, 10],
            &[10, 10, 200, 200, 200, 200, 10, 10],
            &[10, 10, 200, 200, 200, 200, 10, 10],
            &[10, 10, 10, 10, 10, 10, 10, 10],
            &[10, 10, 10, 10, 10, 10, 10, 10],
        ]);
        let t = otsu_threshold(&img);
        let mask = binarize(&img, t);
        assert_eq!(mask.count_ones(), 16);
        assert!(mask.get(3, 3));
        assert!(!mask.get(0, 0));
    }

    #[test]
    fn binarize_selects_dark_leaf_on_bright_background() {
        let img = gray_from_rows(&[
            &[240, 240, 240, 240, 240],
            &[240, 20, 20, 20, 240],
            &[240, 20, 20, 20, 240],
            &[240, 20, 20, 20, 240],
            &[240, 240, 240, 240, 240],
        ]);
        let mask = binarize(&img, otsu_threshold(&img));
        assert!(mask.get(2, 2), "dark interior must be foreground");
        assert!(!mask.get(0, 0));
        assert_eq!(mask.count_ones(), 9);
    }

    #[test]
    fn binarize_tie_prefers_above_threshold_class() {
        // 1x2 image, one pixel per class: both touch the border once.
        let img = GrayImage::new(2, 1, vec![0, 255]);
        let mask = binarize(&img, 100);
        assert!(!mask.get(0, 0));
        assert!(mask.get(1, 0), "tie must pick the > t class");
    }

    #[test]
    fn close_fills_interior_hole() {
        let mut mask = BitMask::new(10, 10, vec![true; 100]);
        mask.set(5, 5, false);
        let closed = morph_close(&mask);
        assert!(closed.get(5, 5));
        assert_eq!(closed.count_ones(), 100);
    }

    #[test]
    fn close_of_empty_is_empty() {
        let mask = BitMask::empty(8, 8);
        assert_eq!(morph_close(&mask).count_ones(), 0);
    }

    #[test]
    fn close_checkerboard_becomes_solid() {
        let mut mask = BitMask::empty(8, 8);
        for y in 0..8 {
            for x in 0..8 {
                mask.set(x, y, (x + y) % 2 == 0);
            }
        }
        assert_eq!(morph_close(&mask).count_ones(), 64);
    }

    #[test]
    fn largest_component_keeps_biggest_blob() {
        let mask = mask_from_rows(&[
            &[1, 1, 0, 0, 0, 0],
            &[1, 1, 0, 0, 0, 0],
            &[0, 0, 0, 0, 0, 0],
            &[0, 0, 0, 1, 1, 1],
            &[0, 0, 0, 1, 1, 1],
            &[0, 0, 0, 1, 1, 1],
        ]);
        let out = largest_component(&mask).unwrap();
        assert_eq!(out.count_ones(), 9);
        assert!(out.get(4, 4));
        assert!(!out.get(0, 0));
    }

    #[test]
    fn largest_component_of_empty_is_none() {
        assert!(largest_component(&BitMask::empty(4, 4)).is_none());
    }

    #[test]
    fn segment_bright_disk_on_dark_background() {
        let mut img = RasterImage::filled(32, 32, [5, 5, 5]);
        for y in 0..32i32 {
            for x in 0..32i32 {
                if (x - 16).pow(2) + (y - 16).pow(2) <= 64 {
                    img.set(x as u32, y as u32, [40, 220, 60]);
                }
            }
        }
        let (seg, mask) = segment_foreground(&img).unwrap();
        assert!(mask.get(16, 16));
        assert!(!mask.get(0, 0));
        assert_eq!(seg.get(0, 0), [0, 0, 0]);
        assert_eq!(seg.get(16, 16), [40, 220, 60]);
        // Exactly one 8-connected component survives.
        let again = largest_component(&mask).unwrap();
        assert_eq!(again.count_ones(), mask.count_ones());
    }

    #[test]
    fn segment_keeps_only_largest_blob() {
        let mut img = RasterImage::filled(24, 24, [0, 0, 0]);
        for y in 4..14u32 {
            for x in 4..14u32 {
                img.set(x, y, [200, 200, 200]); // 100 px blob
            }
        }
        for y in 18..21u32 {
            for x in 18..21u32 {
                img.set(x, y, [200, 200, 200]); // 9 px blob
            }
        }
        let (_, mask) = segment_foreground(&img).unwrap();
        assert!(mask.get(8, 8));
        assert!(!mask.get(19, 19), "small blob must be removed");
    }

    #[test]
    fn segment_constant_zero_image_is_empty() {
        let img = RasterImage::filled(8, 8, [0, 0, 0]);
        assert!(matches!(segment_foreground(&img), Err(ImagingError::EmptyForeground)));
    }

    #[test]
    fn hsv_worked_examples() {
        assert_eq!(rgb_to_hsv([0, 255, 0]), (60, 255, 255));
        assert_eq!(rgb_to_hsv([255, 0, 0]), (0, 255, 255));
        assert_eq!(rgb_to_hsv([100, 100, 100]), (0, 0, 100));
    }
}
