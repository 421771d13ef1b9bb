use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the saliency pipeline and benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: '{path}'")]
    FileNotFound { path: PathBuf },

    #[error("unsupported image format: '{path}' (PNG and JPEG are supported)")]
    UnsupportedFormat { path: PathBuf },

    #[error("corrupt image data in '{path}': {reason}")]
    CorruptData { path: PathBuf, reason: String },

    #[error("i/o failure on '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("expected {expected} image, found {found}")]
    WrongColorSpace { expected: String, found: String },

    #[error("output dimensions must be at least 1x1, requested {height}x{width}")]
    ZeroSizeOutput { height: usize, width: usize },

    #[error("invalid image: {reason}")]
    InvalidImage { reason: String },

    #[error("invalid saliency map: {reason}")]
    InvalidMap { reason: String },

    #[error("requested {n_target} superpixels but the image has only {pixels} pixels")]
    TooManySuperpixels { n_target: usize, pixels: usize },

    #[error("invalid segmentation: {reason}")]
    InvalidSegmentation { reason: String },

    #[error("superpixel graph is disconnected (node {node} unreachable); segmentation is broken")]
    DisconnectedGraph { node: usize },

    #[error("tensor shape mismatch: {reason}")]
    ShapeMismatch { reason: String },

    #[error("dimension mismatch: {left_h}x{left_w} vs {right_h}x{right_w}")]
    DimensionMismatch {
        left_h: usize,
        left_w: usize,
        right_h: usize,
        right_w: usize,
    },

    #[error("target mask must be binary, found value {value} at pixel {index}")]
    NonBinaryTarget { value: f64, index: usize },

    #[error("training dataset is empty")]
    EmptyDataset,

    #[error("training diverged: non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("invalid model file '{path}': {reason}")]
    InvalidModelFile { path: PathBuf, reason: String },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error("ground-truth mask has no salient pixels")]
    EmptyGroundTruth,

    #[error("all {total} dataset entries were skipped; nothing to evaluate")]
    AllImagesSkipped { total: usize },

    #[error("invalid manifest '{path}': {reason}")]
    InvalidManifest { path: PathBuf, reason: String },

    #[error("invalid scale set: {reason}")]
    InvalidScaleSet { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
