//! Deterministic synthetic scenes.
//!
//! The test suites and examples need images with known ground truth: two-tone
//! scenes whose salient object is exactly the region painted in the object
//! color, plus textured images for exercising the segmenter. Everything is
//! seeded, so corpora are reproducible byte for byte.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::{ColorSpace, Image};
use crate::manifest::{DatasetManifest, ManifestEntry};
use crate::saliency::{Mask, Provenance, SaliencyMap};

/// A synthetic image and its exact ground truth.
#[derive(Debug, Clone)]
pub struct Scene {
    pub image: Image,
    pub gt: Mask,
}

/// Two-tone scene: one rectangular or elliptical object in a distinct color
/// on a plain background, with mild per-pixel color noise.
pub fn blob_scene(height: usize, width: usize, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bg = [
        rng.random_range(0.1..0.35),
        rng.random_range(0.2..0.45),
        rng.random_range(0.5..0.85),
    ];
    let fg = [
        rng.random_range(0.65..0.95),
        rng.random_range(0.15..0.4),
        rng.random_range(0.05..0.3),
    ];
    let oh = rng.random_range(height / 4..height / 2).max(2);
    let ow = rng.random_range(width / 4..width / 2).max(2);
    let oy = rng.random_range(height / 8..height - oh - height / 8 + 1);
    let ox = rng.random_range(width / 8..width - ow - width / 8 + 1);
    let ellipse = rng.random_bool(0.5);
    let (cy, cx) = (oy as f64 + oh as f64 / 2.0, ox as f64 + ow as f64 / 2.0);
    let (ry, rx) = (oh as f64 / 2.0, ow as f64 / 2.0);

    let inside = |y: usize, x: usize| -> bool {
        if ellipse {
            let dy = (y as f64 + 0.5 - cy) / ry;
            let dx = (x as f64 + 0.5 - cx) / rx;
            dy * dy + dx * dx <= 1.0
        } else {
            (oy..oy + oh).contains(&y) && (ox..ox + ow).contains(&x)
        }
    };

    let mut data = Vec::with_capacity(height * width * 3);
    let mut gt = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            let fg_px = inside(y, x);
            gt.push(fg_px);
            let base = if fg_px { fg } else { bg };
            for c in base {
                let noisy: f64 = c + rng.random_range(-0.04..0.04);
                data.push(noisy.clamp(0.0, 1.0));
            }
        }
    }
    Scene {
        image: Image::new(height, width, 3, data, ColorSpace::Srgb).expect("in range"),
        gt: Mask::new(height, width, gt).expect("sized"),
    }
}

/// `n` blob scenes with per-scene seeds derived from `seed`.
pub fn scene_corpus(n: usize, height: usize, width: usize, seed: u64) -> Vec<Scene> {
    (0..n)
        .map(|i| blob_scene(height, width, seed.wrapping_add(i as u64).wrapping_mul(0x9e37)))
        .collect()
}

/// A map that equals the ground truth on one half of the image and uniform
/// noise on the other; `correct_left` picks the informative half.
pub fn half_informative_map(gt: &Mask, correct_left: bool, seed: u64) -> SaliencyMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (gt.height(), gt.width());
    let mut values = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let informative = (x < w / 2) == correct_left;
            if informative {
                values.push(gt.is_foreground(y, x) as u8 as f64);
            } else {
                values.push(rng.random_range(0.0..=1.0));
            }
        }
    }
    SaliencyMap::new(h, w, values, Provenance::Deep).expect("in range")
}

/// Smooth diagonal color gradient.
pub fn gradient_image(height: usize, width: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let from = [
        rng.random_range(0.0..0.4),
        rng.random_range(0.0..0.4),
        rng.random_range(0.3..0.6),
    ];
    let to = [
        rng.random_range(0.6..1.0),
        rng.random_range(0.5..0.9),
        rng.random_range(0.0..0.4),
    ];
    let mut data = Vec::with_capacity(height * width * 3);
    for y in 0..height {
        for x in 0..width {
            let t = (y + x) as f64 / (height + width - 2).max(1) as f64;
            for c in 0..3 {
                data.push(from[c] * (1.0 - t) + to[c] * t);
            }
        }
    }
    Image::new(height, width, 3, data, ColorSpace::Srgb).expect("in range")
}

/// Vertical stripes of the given period with two alternating colors.
pub fn stripe_image(height: usize, width: usize, period: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = [
        rng.random_range(0.0..0.3),
        rng.random_range(0.3..0.6),
        rng.random_range(0.6..0.9),
    ];
    let b = [
        rng.random_range(0.7..1.0),
        rng.random_range(0.4..0.7),
        rng.random_range(0.0..0.3),
    ];
    let period = period.max(1);
    let mut data = Vec::with_capacity(height * width * 3);
    for _y in 0..height {
        for x in 0..width {
            let px = if (x / period).is_multiple_of(2) { a } else { b };
            data.extend_from_slice(&px);
        }
    }
    Image::new(height, width, 3, data, ColorSpace::Srgb).expect("in range")
}

/// Independent uniform noise per channel.
pub fn noise_image(height: usize, width: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..height * width * 3)
        .map(|_| rng.random_range(0.0..=1.0))
        .collect();
    Image::new(height, width, 3, data, ColorSpace::Srgb).expect("in range")
}

/// Materialize scenes (and optional per-scene deep maps) as PNG files plus a
/// manifest. Layout under `dir`: `images/<id>.png`, `gt/<id>.png`,
/// `deep/<id>.png`, `manifest.json`. Returns the manifest path.
pub fn write_scene_dataset(
    dir: &Path,
    name: &str,
    scenes: &[Scene],
    deep_maps: Option<&[SaliencyMap]>,
) -> Result<PathBuf> {
    let images = dir.join("images");
    let gts = dir.join("gt");
    std::fs::create_dir_all(&images).map_err(|source| crate::Error::Io {
        path: images.clone(),
        source,
    })?;
    std::fs::create_dir_all(&gts).map_err(|source| crate::Error::Io {
        path: gts.clone(),
        source,
    })?;
    if deep_maps.is_some() {
        let deep = dir.join("deep");
        std::fs::create_dir_all(&deep).map_err(|source| crate::Error::Io {
            path: deep,
            source,
        })?;
    }

    let mut entries = Vec::with_capacity(scenes.len());
    for (i, scene) in scenes.iter().enumerate() {
        let id = format!("scene{i:03}");
        scene.image.save_png(images.join(format!("{id}.png")))?;
        let gt_values: Vec<f64> = scene.gt.to_values();
        crate::image::save_gray(
            &gt_values,
            scene.gt.height(),
            scene.gt.width(),
            gts.join(format!("{id}.png")),
        )?;
        let deep = match deep_maps {
            Some(maps) => {
                let p = dir.join("deep").join(format!("{id}.png"));
                maps[i].save_png(&p)?;
                Some(PathBuf::from(format!("deep/{id}.png")))
            }
            None => None,
        };
        entries.push(ManifestEntry {
            id: Some(id.clone()),
            image: PathBuf::from(format!("images/{id}.png")),
            gt: PathBuf::from(format!("gt/{id}.png")),
            deep,
        });
    }
    let manifest = DatasetManifest {
        name: name.to_string(),
        entries,
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}
