//! Salient object detection toolkit.
//!
//! The pipeline combines an unsupervised boundary-connectivity saliency prior
//! with an externally produced deep saliency map through a small trainable
//! convolutional fusion network, then sharpens object boundaries by
//! multi-scale superpixel median pooling. A benchmark harness evaluates any
//! stage with MAE and 256-point precision/recall curves.

pub mod color;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod image;
pub mod manifest;
pub mod mssf;
pub mod pipeline;
pub mod rbd;
pub mod saliency;
pub mod superpixel;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{evaluate_dataset, mae, pr_points, EvalReport};
pub use fusion::{fuse_forward, Arch, FusionParams, TrainConfig};
pub use image::{load_image, resize_bilinear, rgb_to_lab, save_gray, ColorSpace, Image};
pub use manifest::{DatasetManifest, ManifestEntry};
pub use mssf::{mssf_refine, superpixel_median_map, ScaleSet};
pub use pipeline::{run_pipeline, PipelineConfig, RunOutcome, FUSION_SIZE};
pub use rbd::{rbd_map, RbdParams};
pub use saliency::{Mask, Provenance, SaliencyMap};
pub use superpixel::{
    boundary_superpixels, build_graph, slic, slic_with_energy, Segmentation, SuperpixelGraph,
};
