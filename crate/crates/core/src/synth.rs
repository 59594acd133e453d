//! Deterministic synthetic leaf images for demos and tests.
//!
//! Each (plant, class) pair maps to a stable visual signature: plants vary
//! the leaf shape and base green, disease classes add spots of a
//! class-specific color, size, and density. The generated scenes exercise
//! the whole pipeline (dark background, one bright leaf blob, texture).

use crate::imaging::RasterImage;
use crate::rng::stream_rng;
use rand::Rng;
use std::path::Path;

/// Stable 64-bit string hash (FNV-1a), independent of std's hasher.
fn stable_hash(s: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Render one leaf image. Same arguments, same pixels.
pub fn leaf_image(size: u32, plant: &str, class: &str, seed: u64) -> RasterImage {
    let ph = stable_hash(plant);
    let ch = stable_hash(class);
    let mut rng = stream_rng(seed, ph ^ ch.rotate_left(17));

    // Plant signature: shape and base color.
    let rx = size as f64 * (0.30 + (ph % 7) as f64 * 0.012);
    let ry = size as f64 * (0.24 + ((ph >> 8) % 7) as f64 * 0.012);
    let base_g = 150 + ((ph >> 16) % 60) as i32;
    let base_r = 20 + ((ph >> 24) % 50) as i32;
    let base_b = 25 + ((ph >> 32) % 40) as i32;

    // Class signature: spot pattern. "healthy" classes get none.
    let healthy = class.to_ascii_lowercase().contains("healthy");
    let n_spots = if healthy { 0 } else { 12 + (ch % 20) as usize };
    let spot_radius = 2.0 + ((ch >> 8) % 4) as f64;
    let spot_rgb = [
        90 + ((ch >> 16) % 120) as i32,
        40 + ((ch >> 24) % 70) as i32,
        10 + ((ch >> 32) % 50) as i32,
    ];

    let cx = size as f64 / 2.0;
    let cy = size as f64 / 2.0;
    let mut pixels = Vec::with_capacity((size * size) as usize);
    for y in 0..size {
        for x in 0..size {
            let dx = (x as f64 - cx) / rx;
            let dy = (y as f64 - cy) / ry;
            let inside = dx * dx + dy * dy <= 1.0;
            let noise: i32 = rng.random_range(-8..=8);
            let px = if inside {
                [
                    clamp_u8(base_r + noise),
                    clamp_u8(base_g + noise),
                    clamp_u8(base_b + noise / 2),
                ]
            } else {
                let v = clamp_u8(14 + noise / 2);
                [v, v, v]
            };
            pixels.push(px);
        }
    }
    let mut img = RasterImage::new(size, size, pixels);

    // Spots stay inside the ellipse so they land on the leaf.
    for _ in 0..n_spots {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let radial: f64 = rng.random_range(0.0..0.8f64);
        let sx = cx + angle.cos() * radial.sqrt() * rx;
        let sy = cy + angle.sin() * radial.sqrt() * ry;
        let r = spot_radius + rng.random_range(-1.0..1.0);
        for y in (sy - r).floor() as i64..=(sy + r).ceil() as i64 {
            for x in (sx - r).floor() as i64..=(sx + r).ceil() as i64 {
                if x < 0 || y < 0 || x >= size as i64 || y >= size as i64 {
                    continue;
                }
                let d2 = (x as f64 - sx).powi(2) + (y as f64 - sy).powi(2);
                if d2 <= r * r {
                    let jitter: i32 = rng.random_range(-10..=10);
                    img.set(
                        x as u32,
                        y as u32,
                        [
                            clamp_u8(spot_rgb[0] + jitter),
                            clamp_u8(spot_rgb[1] + jitter),
                            clamp_u8(spot_rgb[2] + jitter / 2),
                        ],
                    );
                }
            }
        }
    }
    img
}

fn clamp_u8(v: i32) -> u8 {
    v.clamp(0, 255) as u8
}

/// Encode as PNG bytes.
pub fn png_bytes(img: &RasterImage) -> Vec<u8> {
    let mut rgb = image::RgbImage::new(img.width(), img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            rgb.put_pixel(x, y, image::Rgb(img.get(x, y)));
        }
    }
    let mut out = std::io::Cursor::new(Vec::new());
    rgb.write_to(&mut out, image::ImageFormat::Png).expect("png encode");
    out.into_inner()
}

/// Write a PlantVillage-style directory tree of synthetic leaves.
pub fn write_dataset(
    root: &Path,
    plants: &[(&str, &[&str])],
    images_per_class: usize,
    size: u32,
    seed: u64,
) -> std::io::Result<()> {
    for (plant, classes) in plants {
        for class in *classes {
            let dir = root.join(format!("{plant}___{class}"));
            std::fs::create_dir_all(&dir)?;
            for i in 0..images_per_class {
                let img_seed = crate::rng::derive_seed(seed, stable_hash(&format!("{plant}/{class}/{i}")));
                let img = leaf_image(size, plant, class, img_seed);
                std::fs::write(dir.join(format!("leaf_{i:04}.png")), png_bytes(&img))?;
            }
        }
    }
    Ok(())
}
