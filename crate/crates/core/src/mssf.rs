//! Multi-scale superpixel median fusion.
//!
//! The learned fusion output is dense but blurry at object boundaries.
//! Re-segmenting the original image at several granularities and replacing
//! every superpixel's scores with their median snaps the map onto real color
//! edges; the per-scale maps are then averaged.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{rgb_to_lab, Image};
use crate::rbd::RbdParams;
use crate::saliency::{Provenance, SaliencyMap};
use crate::superpixel::{slic, Segmentation};

/// Superpixel counts and per-scale weights for the refinement.
#[derive(Debug, Clone)]
pub struct ScaleSet {
    scales: Vec<usize>,
    weights: Vec<f64>,
}

impl Default for ScaleSet {
    fn default() -> Self {
        Self {
            scales: vec![100, 200, 300, 400],
            weights: vec![1.0; 4],
        }
    }
}

impl ScaleSet {
    /// Scales must be strictly increasing; weights nonnegative with a
    /// positive sum so the weighted mean is defined.
    pub fn new(scales: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::InvalidScaleSet {
                reason: "at least one scale is required".into(),
            });
        }
        if !scales.windows(2).all(|p| p[0] < p[1]) {
            return Err(Error::InvalidScaleSet {
                reason: format!("scales must be strictly increasing, got {scales:?}"),
            });
        }
        if weights.len() != scales.len() {
            return Err(Error::InvalidScaleSet {
                reason: format!(
                    "{} weights for {} scales",
                    weights.len(),
                    scales.len()
                ),
            });
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidScaleSet {
                reason: "weights must be finite and nonnegative".into(),
            });
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidScaleSet {
                reason: "weights must not all be zero".into(),
            });
        }
        Ok(Self { scales, weights })
    }

    /// Equal weights across the given scales.
    pub fn uniform(scales: Vec<usize>) -> Result<Self> {
        let weights = vec![1.0; scales.len()];
        Self::new(scales, weights)
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Replace every pixel's score with the median of its superpixel. An even
/// pixel count takes the mean of the two middle values.
pub fn superpixel_median_map(s: &SaliencyMap, seg: &Segmentation) -> Result<SaliencyMap> {
    if s.height() != seg.height() || s.width() != seg.width() {
        return Err(Error::DimensionMismatch {
            left_h: s.height(),
            left_w: s.width(),
            right_h: seg.height(),
            right_w: seg.width(),
        });
    }
    let k = seg.num_superpixels();
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (p, &v) in s.values().iter().enumerate() {
        buckets[seg.labels()[p] as usize].push(v);
    }
    let medians: Vec<f64> = buckets
        .iter_mut()
        .map(|b| {
            b.sort_by(f64::total_cmp);
            let n = b.len();
            if n % 2 == 1 {
                b[n / 2]
            } else {
                (b[n / 2 - 1] + b[n / 2]) / 2.0
            }
        })
        .collect();
    let values = seg
        .labels()
        .iter()
        .map(|&l| medians[l as usize])
        .collect();
    SaliencyMap::new(s.height(), s.width(), values, s.provenance())
}

/// Refine a map against its image: segment at every scale, median-pool the
/// map per superpixel, and average the per-scale results with the scale
/// weights (dividing by their sum keeps values in [0,1]).
///
/// The map is first resized to the image dimensions, since the refinement is
/// only meaningful at the resolution the superpixels live at.
pub fn mssf_refine(s_ds: &SaliencyMap, img: &Image, scales: &ScaleSet) -> Result<SaliencyMap> {
    let (h, w) = (img.height(), img.width());
    let aligned;
    let map = if s_ds.height() == h && s_ds.width() == w {
        s_ds
    } else {
        aligned = s_ds.resized(h, w)?;
        &aligned
    };
    let lab = rgb_to_lab(&img.to_srgb3()?)?;
    let defaults = RbdParams::default();

    let per_scale: Vec<SaliencyMap> = scales
        .scales()
        .par_iter()
        .map(|&n| {
            let seg = slic(
                &lab,
                n.min(h * w),
                defaults.compactness,
                defaults.iters,
            )?;
            superpixel_median_map(map, &seg)
        })
        .collect::<Result<_>>()?;

    let total: f64 = scales.weights().iter().sum();
    let mut values = vec![0.0; h * w];
    for (map_k, &weight) in per_scale.iter().zip(scales.weights()) {
        for (acc, v) in values.iter_mut().zip(map_k.values()) {
            *acc += weight * v;
        }
    }
    for v in &mut values {
        *v = (*v / total).clamp(0.0, 1.0);
    }
    SaliencyMap::new(h, w, values, Provenance::Mssf)
}
