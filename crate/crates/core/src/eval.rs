//! MAE and precision/recall evaluation of saliency maps against binary
//! ground truth, per image and pooled over a dataset.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::quantize_u8;
use crate::manifest::DatasetManifest;
use crate::saliency::{Mask, Provenance, SaliencyMap};

/// Mean absolute per-pixel difference between two equally sized maps.
pub fn mae(s: &SaliencyMap, gt: &SaliencyMap) -> Result<f64> {
    if s.height() != gt.height() || s.width() != gt.width() {
        return Err(Error::DimensionMismatch {
            left_h: s.height(),
            left_w: s.width(),
            right_h: gt.height(),
            right_w: gt.width(),
        });
    }
    let sum: f64 = s
        .values()
        .iter()
        .zip(gt.values())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / s.values().len() as f64)
}

/// MAE against a binary mask taken as 0.0 / 1.0 values.
pub fn mae_mask(s: &SaliencyMap, gt: &Mask) -> Result<f64> {
    if s.height() != gt.height() || s.width() != gt.width() {
        return Err(Error::DimensionMismatch {
            left_h: s.height(),
            left_w: s.width(),
            right_h: gt.height(),
            right_w: gt.width(),
        });
    }
    let sum: f64 = s
        .values()
        .iter()
        .zip(gt.data())
        .map(|(v, &fg)| (v - fg as u8 as f64).abs())
        .sum();
    Ok(sum / s.values().len() as f64)
}

/// One point of the 256-threshold precision/recall sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: u8,
    pub precision: f64,
    pub recall: f64,
}

/// Binarize the map at every threshold t in 0..=255 (a pixel is detected when
/// round(s * 255) >= t) and score against the mask. Precision of an empty
/// detection set is defined as 1. Errors when the ground truth has no salient
/// pixel.
pub fn pr_points(s: &SaliencyMap, gt: &Mask) -> Result<Vec<PrPoint>> {
    if s.height() != gt.height() || s.width() != gt.width() {
        return Err(Error::DimensionMismatch {
            left_h: s.height(),
            left_w: s.width(),
            right_h: gt.height(),
            right_w: gt.width(),
        });
    }
    let total_pos = gt.foreground_count() as u64;
    if total_pos == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let mut pos_hist = [0u64; 256];
    let mut neg_hist = [0u64; 256];
    for (v, &fg) in s.values().iter().zip(gt.data()) {
        let byte = quantize_u8(*v) as usize;
        if fg {
            pos_hist[byte] += 1;
        } else {
            neg_hist[byte] += 1;
        }
    }
    let mut points = Vec::with_capacity(256);
    let mut tp = 0u64;
    let mut detected = 0u64;
    for t in (0..256usize).rev() {
        tp += pos_hist[t];
        detected += pos_hist[t] + neg_hist[t];
        let precision = if detected == 0 {
            1.0
        } else {
            tp as f64 / detected as f64
        };
        points.push(PrPoint {
            threshold: t as u8,
            precision,
            recall: tp as f64 / total_pos as f64,
        });
    }
    points.reverse();
    Ok(points)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerImageResult {
    pub id: String,
    pub mae: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub id: String,
    pub reason: String,
}

/// Per-image and pooled evaluation results for one method on one dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub method: String,
    /// Predictions are resampled to ground-truth resolution before scoring.
    pub resolution_policy: String,
    pub evaluated: usize,
    pub skipped: usize,
    pub mean_mae: f64,
    pub per_image: Vec<PerImageResult>,
    /// Per-threshold mean of per-image precision and recall.
    pub pr_curve: Vec<PrPoint>,
    pub skipped_entries: Vec<SkippedEntry>,
}

pub const RESOLUTION_POLICY: &str = "predictions resized to ground-truth resolution";

/// Score the maps in `maps_dir` (named `<id>.png`) against a manifest's
/// ground truths. Entries whose output is missing, whose files fail to load,
/// or whose ground truth is empty are counted as skipped.
pub fn evaluate_dataset(
    manifest: &DatasetManifest,
    maps_dir: &Path,
    method: &str,
) -> Result<EvalReport> {
    let mut per_image = Vec::new();
    let mut skipped_entries = Vec::new();
    let mut precision_sum = vec![0.0f64; 256];
    let mut recall_sum = vec![0.0f64; 256];

    for entry in &manifest.entries {
        let id = entry.effective_id();
        let map_path = maps_dir.join(format!("{id}.png"));
        if !map_path.exists() {
            skipped_entries.push(SkippedEntry {
                id,
                reason: format!("no output at '{}'", map_path.display()),
            });
            continue;
        }
        let outcome = (|| -> Result<(f64, Vec<PrPoint>)> {
            let gt = Mask::load_png(&entry.gt)?;
            let mut map = SaliencyMap::load_png(&map_path, Provenance::Fused)?;
            if map.height() != gt.height() || map.width() != gt.width() {
                map = map.resized(gt.height(), gt.width())?;
            }
            let mae = mae_mask(&map, &gt)?;
            let pr = pr_points(&map, &gt)?;
            Ok((mae, pr))
        })();
        match outcome {
            Ok((mae, pr)) => {
                for (i, p) in pr.iter().enumerate() {
                    precision_sum[i] += p.precision;
                    recall_sum[i] += p.recall;
                }
                per_image.push(PerImageResult { id, mae });
            }
            Err(e) => skipped_entries.push(SkippedEntry {
                id,
                reason: e.to_string(),
            }),
        }
    }

    let evaluated = per_image.len();
    if evaluated == 0 {
        return Err(Error::AllImagesSkipped {
            total: manifest.entries.len(),
        });
    }
    let mean_mae = per_image.iter().map(|r| r.mae).sum::<f64>() / evaluated as f64;
    let inv = 1.0 / evaluated as f64;
    let pr_curve = (0..256)
        .map(|t| PrPoint {
            threshold: t as u8,
            precision: precision_sum[t] * inv,
            recall: recall_sum[t] * inv,
        })
        .collect();

    Ok(EvalReport {
        dataset: manifest.name.clone(),
        method: method.to_string(),
        resolution_policy: RESOLUTION_POLICY.to_string(),
        evaluated,
        skipped: skipped_entries.len(),
        mean_mae,
        per_image,
        pr_curve,
        skipped_entries,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })
    }

    /// Curve data for plotting: `threshold,precision,recall` per line.
    pub fn write_pr_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("threshold,precision,recall\n");
        for p in &self.pr_curve {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
        }
        let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        file.write_all(out.as_bytes()).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })
    }

    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| match source.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound { path: path.into() },
            _ => Error::Io {
                path: path.into(),
                source,
            },
        })?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidManifest {
            path: path.into(),
            reason: format!("not a valid report: {e}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map_of(h: usize, w: usize, values: Vec<f64>) -> SaliencyMap {
        SaliencyMap::new(h, w, values, Provenance::Rbd).unwrap()
    }

    fn mask_of(h: usize, w: usize, data: Vec<bool>) -> Mask {
        Mask::new(h, w, data).unwrap()
    }

    #[test]
    fn identical_maps_have_zero_mae() {
        let m = map_of(2, 2, vec![0.1, 0.5, 0.9, 0.3]);
        assert_eq!(mae(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn complement_of_binary_mask_has_mae_one() {
        let gt = map_of(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let s = map_of(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(mae(&s, &gt).unwrap(), 1.0);
    }

    #[test]
    fn four_term_hand_sum() {
        let s = map_of(2, 2, vec![0.2, 0.4, 0.6, 0.8]);
        let gt = map_of(2, 2, vec![0.0, 0.0, 1.0, 1.0]);
        assert!((mae(&s, &gt).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn mae_rejects_dimension_mismatch() {
        let a = map_of(2, 2, vec![0.0; 4]);
        let b = map_of(2, 3, vec![0.0; 6]);
        assert!(matches!(mae(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn all_ones_map_on_half_salient_mask() {
        let s = map_of(2, 2, vec![1.0; 4]);
        let gt = mask_of(2, 2, vec![true, true, false, false]);
        let pr = pr_points(&s, &gt).unwrap();
        assert_eq!(pr.len(), 256);
        for p in &pr {
            assert_eq!(p.recall, 1.0);
            assert_eq!(p.precision, 0.5);
        }
    }

    #[test]
    fn binary_map_equal_to_mask() {
        let gt_bits = vec![true, false, false, true, false, true];
        let s = map_of(2, 3, gt_bits.iter().map(|&b| b as u8 as f64).collect());
        let gt = mask_of(2, 3, gt_bits);
        let pr = pr_points(&s, &gt).unwrap();
        assert_eq!(pr[0].recall, 1.0);
        assert_eq!(pr[0].precision, 3.0 / 6.0); // t=0 detects everything
        for p in &pr[1..] {
            assert_eq!(p.precision, 1.0);
            assert_eq!(p.recall, 1.0);
        }
    }

    #[test]
    fn empty_ground_truth_is_an_error() {
        let s = map_of(1, 2, vec![0.5, 0.5]);
        let gt = mask_of(1, 2, vec![false, false]);
        assert!(matches!(pr_points(&s, &gt), Err(Error::EmptyGroundTruth)));
    }

    /// Exhaustive confusion-matrix enumeration, one threshold at a time.
    fn pr_oracle(s: &SaliencyMap, gt: &Mask) -> Vec<PrPoint> {
        let total_pos = gt.foreground_count() as u64;
        (0..256u32)
            .map(|t| {
                let mut tp = 0u64;
                let mut detected = 0u64;
                for (v, &fg) in s.values().iter().zip(gt.data()) {
                    if (quantize_u8(*v) as u32) >= t {
                        detected += 1;
                        if fg {
                            tp += 1;
                        }
                    }
                }
                PrPoint {
                    threshold: t as u8,
                    precision: if detected == 0 {
                        1.0
                    } else {
                        tp as f64 / detected as f64
                    },
                    recall: tp as f64 / total_pos as f64,
                }
            })
            .collect()
    }

    #[test]
    fn graded_map_matches_confusion_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..50 {
            let (h, w) = (rng.random_range(1..=8), rng.random_range(1..=8));
            let values: Vec<f64> = (0..h * w).map(|_| rng.random_range(0.0..=1.0)).collect();
            let mut bits: Vec<bool> = (0..h * w).map(|_| rng.random_bool(0.4)).collect();
            if !bits.iter().any(|&b| b) {
                bits[0] = true;
            }
            let s = map_of(h, w, values);
            let gt = mask_of(h, w, bits);
            let got = pr_points(&s, &gt).unwrap();
            let want = pr_oracle(&s, &gt);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn recall_never_increases_with_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let values: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..=1.0)).collect();
        let bits: Vec<bool> = (0..64).map(|i| i % 3 == 0).collect();
        let pr = pr_points(&map_of(8, 8, values), &mask_of(8, 8, bits)).unwrap();
        for pair in pr.windows(2) {
            assert!(pair[1].recall <= pair[0].recall);
        }
        assert_eq!(pr[0].recall, 1.0);
    }

    #[test]
    fn dataset_mean_is_mean_of_per_image() {
        // image 0 scores perfectly; image 1 misses a quarter of the pixels
        let dir = tempfile::tempdir().unwrap();
        let (images, gts, maps) = (
            dir.path().join("images"),
            dir.path().join("gt"),
            dir.path().join("maps"),
        );
        for d in [&images, &gts, &maps] {
            std::fs::create_dir_all(d).unwrap();
        }
        let gt_a: Vec<f64> = (0..16).map(|i| (i < 8) as u8 as f64).collect();
        let gt_b: Vec<f64> = (0..16).map(|i| (i < 4) as u8 as f64).collect();
        for (id, gt, pred) in [
            ("a", &gt_a, gt_a.clone()),
            ("b", &gt_b, gt_a.clone()), // differs from gt_b on 4 of 16 pixels
        ] {
            crate::image::save_gray(&[0.5; 16], 4, 4, images.join(format!("{id}.png")))
                .unwrap();
            crate::image::save_gray(gt, 4, 4, gts.join(format!("{id}.png"))).unwrap();
            crate::image::save_gray(&pred, 4, 4, maps.join(format!("{id}.png"))).unwrap();
        }
        let manifest = DatasetManifest {
            name: "pair".into(),
            entries: ["a", "b"]
                .iter()
                .map(|id| crate::manifest::ManifestEntry {
                    id: Some(id.to_string()),
                    image: images.join(format!("{id}.png")),
                    gt: gts.join(format!("{id}.png")),
                    deep: None,
                })
                .collect(),
        };
        let report = evaluate_dataset(&manifest, &maps, "test").unwrap();
        assert_eq!(report.per_image[0].mae, 0.0);
        assert_eq!(report.per_image[1].mae, 0.25);
        assert_eq!(report.mean_mae, 0.125);
        let recomputed =
            report.per_image.iter().map(|r| r.mae).sum::<f64>() / report.per_image.len() as f64;
        assert!((report.mean_mae - recomputed).abs() <= 1e-12);
    }

    #[test]
    fn missing_outputs_are_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let gts = dir.path().join("gt");
        let maps = dir.path().join("maps");
        std::fs::create_dir_all(&gts).unwrap();
        std::fs::create_dir_all(&maps).unwrap();
        let gt: Vec<f64> = (0..16).map(|i| (i % 2) as f64).collect();
        crate::image::save_gray(&gt, 4, 4, gts.join("a.png")).unwrap();
        crate::image::save_gray(&gt, 4, 4, gts.join("b.png")).unwrap();
        crate::image::save_gray(&gt, 4, 4, maps.join("a.png")).unwrap();
        let manifest = DatasetManifest {
            name: "partial".into(),
            entries: ["a", "b"]
                .iter()
                .map(|id| crate::manifest::ManifestEntry {
                    id: Some(id.to_string()),
                    image: gts.join(format!("{id}.png")),
                    gt: gts.join(format!("{id}.png")),
                    deep: None,
                })
                .collect(),
        };
        let report = evaluate_dataset(&manifest, &maps, "partial").unwrap();
        assert_eq!(report.evaluated, 1);
        assert_eq!(report.skipped, 1);
        assert_eq!(report.skipped_entries[0].id, "b");

        let empty = dir.path().join("empty");
        std::fs::create_dir_all(&empty).unwrap();
        assert!(matches!(
            evaluate_dataset(&manifest, &empty, "none"),
            Err(Error::AllImagesSkipped { total: 2 })
        ));
    }

    proptest! {
        #[test]
        fn mae_is_symmetric_and_bounded(
            a in proptest::collection::vec(0.0f64..=1.0, 12),
            b in proptest::collection::vec(0.0f64..=1.0, 12),
        ) {
            let ma = map_of(3, 4, a);
            let mb = map_of(3, 4, b);
            let ab = mae(&ma, &mb).unwrap();
            let ba = mae(&mb, &ma).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn raising_a_pixel_never_lowers_recall(
            values in proptest::collection::vec(0.0f64..=1.0, 16),
            idx in 0usize..16,
            bump in 0.0f64..=1.0,
        ) {
            let mut bits = vec![false; 16];
            bits[3] = true;
            bits[7] = true;
            let gt = mask_of(4, 4, bits);
            let base = map_of(4, 4, values.clone());
            let mut raised = values;
            raised[idx] = (raised[idx] + bump).min(1.0);
            let raised = map_of(4, 4, raised);
            let pr_base = pr_points(&base, &gt).unwrap();
            let pr_raised = pr_points(&raised, &gt).unwrap();
            for (b, r) in pr_base.iter().zip(&pr_raised) {
                prop_assert!(r.recall >= b.recall);
            }
        }
    }
}
