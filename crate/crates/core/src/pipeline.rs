//! End-to-end runs over a dataset manifest: boundary-connectivity saliency,
//! optional learned fusion with provided deep maps, multi-scale refinement,
//! and per-stage evaluation reports.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{evaluate_dataset, EvalReport, SkippedEntry};
use crate::fusion::{fuse_forward, FusionParams, TrainSample};
use crate::image::load_image;
use crate::manifest::DatasetManifest;
use crate::mssf::{mssf_refine, ScaleSet};
use crate::rbd::{rbd_map, RbdParams};
use crate::saliency::{Mask, Provenance, SaliencyMap};

/// Working resolution of the fusion network's inputs.
pub const FUSION_SIZE: usize = 224;

/// Everything a pipeline run needs besides the manifest and model.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub rbd: RbdParams,
    pub scales: ScaleSet,
    pub seed: u64,
    /// Rayon worker count; `None` uses the global default.
    pub jobs: Option<usize>,
    /// Fraction of entries allowed to fail before the quality gate trips.
    pub skip_tolerance: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rbd: RbdParams::default(),
            scales: ScaleSet::default(),
            seed: 0,
            jobs: None,
            skip_tolerance: 0.1,
        }
    }
}

impl PipelineConfig {
    /// Apply a `key=value` config file ('#' starts a comment line).
    ///
    /// Keys: n_seg, compactness, iters, sigma_clr, sigma_bnd, sigma_spa,
    /// smooth_mu, scales, weights, seed, jobs, skip_tolerance.
    pub fn apply_file<P: AsRef<Path>>(&mut self, path: P) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| match source.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound { path: path.into() },
            _ => Error::Io {
                path: path.into(),
                source,
            },
        })?;
        let mut scales: Option<Vec<usize>> = None;
        let mut weights: Option<Vec<f64>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::InvalidConfig {
                reason: format!("line {}: expected key=value, got '{line}'", lineno + 1),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::InvalidConfig {
                reason: format!("line {}: invalid {what}: '{value}'", lineno + 1),
            };
            match key {
                "n_seg" => self.rbd.n_seg = value.parse().map_err(|_| bad("n_seg"))?,
                "compactness" => {
                    self.rbd.compactness = value.parse().map_err(|_| bad("compactness"))?
                }
                "iters" => self.rbd.iters = value.parse().map_err(|_| bad("iters"))?,
                "sigma_clr" => self.rbd.sigma_clr = value.parse().map_err(|_| bad("sigma_clr"))?,
                "sigma_bnd" => self.rbd.sigma_bnd = value.parse().map_err(|_| bad("sigma_bnd"))?,
                "sigma_spa" => self.rbd.sigma_spa = value.parse().map_err(|_| bad("sigma_spa"))?,
                "smooth_mu" => self.rbd.smooth_mu = value.parse().map_err(|_| bad("smooth_mu"))?,
                "scales" => {
                    scales = Some(parse_list(value).map_err(|_| bad("scales"))?);
                }
                "weights" => {
                    weights = Some(parse_list(value).map_err(|_| bad("weights"))?);
                }
                "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
                "jobs" => self.jobs = Some(value.parse().map_err(|_| bad("jobs"))?),
                "skip_tolerance" => {
                    self.skip_tolerance = value.parse().map_err(|_| bad("skip_tolerance"))?
                }
                other => {
                    return Err(Error::InvalidConfig {
                        reason: format!("line {}: unknown key '{other}'", lineno + 1),
                    })
                }
            }
        }
        if scales.is_some() || weights.is_some() {
            let s = scales.unwrap_or_else(|| self.scales.scales().to_vec());
            let w = weights.unwrap_or_else(|| vec![1.0; s.len()]);
            self.scales = ScaleSet::new(s, w)?;
        }
        Ok(())
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, ()> {
    value
        .split(',')
        .map(|part| part.trim().parse::<T>().map_err(|_| ()))
        .collect()
}

/// Assemble fusion training triples from a manifest: the deep map comes from
/// each entry's `deep` path, the unsupervised map is computed from the image,
/// and everything is resampled to the fusion working size. Unlike a pipeline
/// run, a broken entry here is fatal — training data must be complete.
pub fn build_training_set(
    manifest: &DatasetManifest,
    rbd_params: &RbdParams,
    jobs: Option<usize>,
) -> Result<Vec<TrainSample>> {
    let build = |entry: &crate::manifest::ManifestEntry| -> Result<TrainSample> {
        let deep_path = entry.deep.as_ref().ok_or_else(|| Error::InvalidConfig {
            reason: format!(
                "training requires a deep map for every entry; '{}' has none",
                entry.effective_id()
            ),
        })?;
        let image = load_image(&entry.image)?;
        let rbd = rbd_map(&image, rbd_params)?.resized(FUSION_SIZE, FUSION_SIZE)?;
        let deep =
            SaliencyMap::load_png(deep_path, Provenance::Deep)?.resized(FUSION_SIZE, FUSION_SIZE)?;
        let gt_map =
            SaliencyMap::load_png(&entry.gt, Provenance::Deep)?.resized(FUSION_SIZE, FUSION_SIZE)?;
        Ok(TrainSample {
            deep,
            rbd,
            gt: Mask::from_map(&gt_map),
        })
    };
    let work = || manifest.entries.par_iter().map(build).collect();
    match jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig {
                reason: format!("cannot build a {jobs}-thread pool: {e}"),
            })?
            .install(work),
        None => work(),
    }
}

/// Reports and bookkeeping from a full run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rbd: EvalReport,
    pub ds: Option<EvalReport>,
    pub dsm: Option<EvalReport>,
    pub failures: Vec<SkippedEntry>,
    pub total_entries: usize,
    /// True when more than `skip_tolerance` of the entries failed.
    pub quality_gate_failed: bool,
}

fn process_entry(
    entry: &crate::manifest::ManifestEntry,
    model: Option<&FusionParams>,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<()> {
    let id = entry.effective_id();
    let image = load_image(&entry.image)?;
    let rbd = rbd_map(&image, &cfg.rbd)?;
    rbd.save_png(out_dir.join("rbd").join(format!("{id}.png")))?;

    let Some(params) = model else {
        return Ok(());
    };
    let deep_path = entry.deep.as_ref().ok_or_else(|| Error::InvalidConfig {
        reason: format!("fusion requested but entry '{id}' has no deep map"),
    })?;
    let deep = SaliencyMap::load_png(deep_path, Provenance::Deep)?;
    let fused = fuse_forward(
        params,
        &deep.resized(FUSION_SIZE, FUSION_SIZE)?,
        &rbd.resized(FUSION_SIZE, FUSION_SIZE)?,
    )?;
    fused.save_png(out_dir.join("ds").join(format!("{id}.png")))?;

    let refined = mssf_refine(&fused, &image, &cfg.scales)?;
    refined.save_png(out_dir.join("dsm").join(format!("{id}.png")))?;
    Ok(())
}

/// Run every stage over the manifest, writing per-stage maps under
/// `out_dir/{rbd,ds,dsm}` and reports (`report_<stage>.json` and `.csv`)
/// into `out_dir`. Per-entry failures are collected, not fatal; the quality
/// gate trips when more than `skip_tolerance` of the entries fail.
///
/// Fusion and refinement run only when a model is given; without one the run
/// is boundary-connectivity only.
pub fn run_pipeline(
    manifest: &DatasetManifest,
    model: Option<&FusionParams>,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<RunOutcome> {
    let mkdir = |sub: &str| -> Result<()> {
        let p = out_dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|source| Error::Io { path: p, source })
    };
    mkdir("rbd")?;
    if model.is_some() {
        mkdir("ds")?;
        mkdir("dsm")?;
    }

    let work = || -> Vec<(String, Option<String>)> {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let id = entry.effective_id();
                let err = process_entry(entry, model, cfg, out_dir)
                    .err()
                    .map(|e| e.to_string());
                (id, err)
            })
            .collect()
    };
    let results = match cfg.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig {
                reason: format!("cannot build a {jobs}-thread pool: {e}"),
            })?
            .install(work),
        None => work(),
    };

    let failures: Vec<SkippedEntry> = results
        .into_iter()
        .filter_map(|(id, err)| err.map(|reason| SkippedEntry { id, reason }))
        .collect();
    let total = manifest.entries.len();
    let quality_gate_failed = failures.len() as f64 > cfg.skip_tolerance * total as f64;

    let eval_stage = |stage: &str| -> Result<EvalReport> {
        let report = evaluate_dataset(manifest, &out_dir.join(stage), stage)?;
        report.write_json(out_dir.join(format!("report_{stage}.json")))?;
        report.write_pr_csv(out_dir.join(format!("report_{stage}.csv")))?;
        Ok(report)
    };

    let rbd = eval_stage("rbd")?;
    let (ds, dsm) = if model.is_some() {
        (Some(eval_stage("ds")?), Some(eval_stage("dsm")?))
    } else {
        (None, None)
    };

    Ok(RunOutcome {
        rbd,
        ds,
        dsm,
        failures,
        total_entries: total,
        quality_gate_failed,
    })
}
