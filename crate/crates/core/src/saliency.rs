//! Saliency maps: per-pixel scores in [0,1] with a provenance tag.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{self, ColorSpace, Image};

/// Which stage of the pipeline produced a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Unsupervised boundary-connectivity saliency.
    Rbd,
    /// Externally produced deep-model map, ingested from disk.
    Deep,
    /// Output of the learned two-layer fusion network.
    Fused,
    /// After multi-scale superpixel median refinement.
    Mssf,
}

/// H x W map of saliency scores in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    provenance: Provenance,
}

impl SaliencyMap {
    pub fn new(
        height: usize,
        width: usize,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidMap {
                reason: format!("dimensions must be positive, got {height}x{width}"),
            });
        }
        if values.len() != height * width {
            return Err(Error::InvalidMap {
                reason: format!(
                    "expected {} values for {height}x{width}, got {}",
                    height * width,
                    values.len()
                ),
            });
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidMap {
                reason: format!("value {bad} outside [0,1]"),
            });
        }
        Ok(Self {
            height,
            width,
            values,
            provenance,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64, provenance: Provenance) -> Self {
        Self::new(height, width, vec![value; height * width], provenance)
            .expect("constant in range")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    #[inline]
    pub fn value(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Re-tag a map that has moved to the next pipeline stage.
    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Write the map as an 8-bit grayscale PNG (round-half-up quantization).
    pub fn save_png<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        image::save_gray(&self.values, self.height, self.width, path)
    }

    /// Load a grayscale PNG (or any PNG/JPEG; color inputs are averaged per
    /// pixel) as a saliency map.
    pub fn load_png<P: AsRef<Path>>(path: P, provenance: Provenance) -> Result<Self> {
        let img = image::load_image(path)?;
        Ok(Self::from_image(&img, provenance))
    }

    /// Collapse an image to a map: gray images pass through, color images are
    /// averaged across channels.
    pub fn from_image(img: &Image, provenance: Provenance) -> Self {
        let values: Vec<f64> = match img.colorspace() {
            ColorSpace::Gray => img.data().to_vec(),
            _ => img
                .data()
                .chunks_exact(img.channels())
                .map(|px| px.iter().sum::<f64>() / px.len() as f64)
                .collect(),
        };
        Self::new(img.height(), img.width(), values, provenance).expect("image samples in range")
    }

    /// Corner-aligned bilinear resize; provenance is preserved.
    pub fn resized(&self, out_h: usize, out_w: usize) -> Result<Self> {
        if out_h == 0 || out_w == 0 {
            return Err(Error::ZeroSizeOutput {
                height: out_h,
                width: out_w,
            });
        }
        let values =
            image::bilinear_resample(&self.values, self.height, self.width, 1, out_h, out_w);
        Self::new(out_h, out_w, values, self.provenance)
    }
}

/// Binary ground-truth mask. Loaded PNGs are thresholded at byte value 128;
/// benchmark ground truths are nominally binary but often carry antialiased
/// edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::InvalidMap {
                reason: format!(
                    "mask needs {} entries for {height}x{width}, got {}",
                    height * width,
                    data.len()
                ),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Binarize a map: a pixel is foreground when round(v * 255) >= 128.
    pub fn from_map(map: &SaliencyMap) -> Self {
        let data = map
            .values()
            .iter()
            .map(|&v| image::quantize_u8(v) >= 128)
            .collect();
        Self {
            height: map.height(),
            width: map.width(),
            data,
        }
    }

    pub fn load_png<P: AsRef<Path>>(path: P) -> Result<Self> {
        let map = SaliencyMap::load_png(path, Provenance::Deep)?;
        Ok(Self::from_map(&map))
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn is_foreground(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// The mask as 0.0/1.0 values, e.g. for MAE against a prediction.
    pub fn to_values(&self) -> Vec<f64> {
        self.data.iter().map(|&b| b as u8 as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_values() {
        assert!(SaliencyMap::new(1, 2, vec![0.5, 1.2], Provenance::Rbd).is_err());
        assert!(SaliencyMap::new(1, 2, vec![-0.1, 0.0], Provenance::Rbd).is_err());
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(SaliencyMap::new(2, 2, vec![0.0; 3], Provenance::Deep).is_err());
    }

    #[test]
    fn png_round_trip_preserves_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let map = SaliencyMap::new(2, 2, vec![0.0, 0.5, 0.25, 1.0], Provenance::Fused).unwrap();
        map.save_png(&path).unwrap();
        let back = SaliencyMap::load_png(&path, Provenance::Fused).unwrap();
        for (a, b) in map.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1.0 / 510.0);
        }
    }

    #[test]
    fn resize_preserves_range_and_provenance() {
        let map = SaliencyMap::new(2, 3, vec![0.0, 1.0, 0.2, 0.8, 0.5, 0.5], Provenance::Mssf)
            .unwrap();
        let out = map.resized(5, 4).unwrap();
        assert_eq!(out.provenance(), Provenance::Mssf);
        assert!(out.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn mask_threshold_sits_at_half() {
        // 127/255 rounds to 127 (background), 0.5 rounds to 128 (foreground)
        let map =
            SaliencyMap::new(1, 3, vec![127.0 / 255.0, 0.5, 1.0], Provenance::Deep).unwrap();
        let mask = Mask::from_map(&map);
        assert_eq!(mask.data(), &[false, true, true]);
        assert_eq!(mask.foreground_count(), 2);
        assert_eq!(mask.to_values(), vec![0.0, 1.0, 1.0]);
    }
}
