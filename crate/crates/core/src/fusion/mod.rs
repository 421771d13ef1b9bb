//! The shallow fusion network: two convolutions mapping the channel
//! concatenation of a deep saliency map and an unsupervised saliency map to a
//! fused per-pixel foreground probability.

mod model_file;
mod ops;
mod tensor;
mod train;

pub use model_file::{load_model, save_model};
pub use ops::{
    conv2d_backward, conv2d_forward, relu, relu_backward, softmax2, softmax_xent, ConvGrads,
};
pub use tensor::{ConvKernel, Tensor};
pub use train::{poly_lr, train, TrainConfig, TrainOutcome, TrainSample};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::saliency::{Provenance, SaliencyMap};

/// Architecture descriptor: kernel sizes and hidden width of the two layers.
/// The activation between them is ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    /// First kernel size (odd).
    pub k1: usize,
    /// Hidden channel count.
    pub hidden: usize,
    /// Second kernel size (odd).
    pub k2: usize,
}

impl Default for Arch {
    fn default() -> Self {
        // smallest setup with spatial context and a nonlinearity
        Self {
            k1: 3,
            hidden: 8,
            k2: 3,
        }
    }
}

impl Arch {
    pub fn validate(&self) -> Result<()> {
        if self.k1.is_multiple_of(2) || self.k2.is_multiple_of(2) || self.k1 == 0 || self.k2 == 0 {
            return Err(Error::InvalidConfig {
                reason: format!("kernel sizes must be odd, got {} and {}", self.k1, self.k2),
            });
        }
        if self.hidden == 0 {
            return Err(Error::InvalidConfig {
                reason: "hidden channel count must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Weights and biases of the two-layer network. Layer 1 maps the two
/// concatenated maps to `hidden` channels; layer 2 maps them to two logit
/// channels (background, salient).
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    arch: Arch,
    conv1: ConvKernel,
    bias1: Vec<f64>,
    conv2: ConvKernel,
    bias2: Vec<f64>,
}

impl FusionParams {
    /// All-zero parameters (useful as a degenerate baseline: the output is a
    /// uniform 0.5 map).
    pub fn zeros(arch: Arch) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            conv1: ConvKernel::zeros(arch.k1, arch.k1, 2, arch.hidden),
            bias1: vec![0.0; arch.hidden],
            conv2: ConvKernel::zeros(arch.k2, arch.k2, arch.hidden, 2),
            bias2: vec![0.0; 2],
            arch,
        })
    }

    /// Xavier-uniform kernels (bound sqrt(6 / (fan_in + fan_out))) and zero
    /// biases, drawn deterministically from `seed`.
    pub fn xavier_init(arch: Arch, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::xavier_init_with(arch, &mut rng)
    }

    pub(crate) fn xavier_init_with(arch: Arch, rng: &mut ChaCha8Rng) -> Result<Self> {
        arch.validate()?;
        let mut params = Self::zeros(arch)?;
        for (kernel, cin, cout, k) in [
            (&mut params.conv1, 2, arch.hidden, arch.k1),
            (&mut params.conv2, arch.hidden, 2, arch.k2),
        ] {
            let fan_in = (k * k * cin) as f64;
            let fan_out = (k * k * cout) as f64;
            let bound = (6.0 / (fan_in + fan_out)).sqrt();
            for v in kernel.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(params)
    }

    pub fn from_parts(
        arch: Arch,
        conv1: ConvKernel,
        bias1: Vec<f64>,
        conv2: ConvKernel,
        bias2: Vec<f64>,
    ) -> Result<Self> {
        arch.validate()?;
        let expect = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::ShapeMismatch {
                    reason: format!("{what} does not match the architecture descriptor"),
                })
            }
        };
        expect(
            conv1.kh() == arch.k1
                && conv1.kw() == arch.k1
                && conv1.cin() == 2
                && conv1.cout() == arch.hidden,
            "conv1 kernel",
        )?;
        expect(bias1.len() == arch.hidden, "conv1 bias")?;
        expect(
            conv2.kh() == arch.k2
                && conv2.kw() == arch.k2
                && conv2.cin() == arch.hidden
                && conv2.cout() == 2,
            "conv2 kernel",
        )?;
        expect(bias2.len() == 2, "conv2 bias")?;
        Ok(Self {
            arch,
            conv1,
            bias1,
            conv2,
            bias2,
        })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn conv1(&self) -> &ConvKernel {
        &self.conv1
    }

    pub fn bias1(&self) -> &[f64] {
        &self.bias1
    }

    pub fn conv2(&self) -> &ConvKernel {
        &self.conv2
    }

    pub fn bias2(&self) -> &[f64] {
        &self.bias2
    }
}

/// Stack the two maps as channels: channel 0 carries the deep map, channel 1
/// the unsupervised map.
fn concat_inputs(s_deep: &SaliencyMap, s_rbd: &SaliencyMap) -> Result<Tensor> {
    if s_deep.height() != s_rbd.height() || s_deep.width() != s_rbd.width() {
        return Err(Error::DimensionMismatch {
            left_h: s_deep.height(),
            left_w: s_deep.width(),
            right_h: s_rbd.height(),
            right_w: s_rbd.width(),
        });
    }
    let (h, w) = (s_deep.height(), s_deep.width());
    let mut t = Tensor::zeros(h, w, 2);
    let data = t.data_mut();
    for (i, (d, r)) in s_deep.values().iter().zip(s_rbd.values()).enumerate() {
        data[2 * i] = *d;
        data[2 * i + 1] = *r;
    }
    Ok(t)
}

/// Forward pass keeping the intermediate tensors needed for backpropagation.
pub(crate) struct ForwardCache {
    pub input: Tensor,
    pub pre_hidden: Tensor,
    pub hidden: Tensor,
    pub logits: Tensor,
}

pub(crate) fn forward_cached(params: &FusionParams, input: Tensor) -> Result<ForwardCache> {
    let pre_hidden = conv2d_forward(&input, &params.conv1, &params.bias1)?;
    let hidden = relu(&pre_hidden);
    let logits = conv2d_forward(&hidden, &params.conv2, &params.bias2)?;
    Ok(ForwardCache {
        input,
        pre_hidden,
        hidden,
        logits,
    })
}

/// Fuse two equally sized maps into a foreground-probability map:
/// concat -> conv -> ReLU -> conv -> per-pixel 2-class softmax, keeping the
/// salient-class channel.
pub fn fuse_forward(
    params: &FusionParams,
    s_deep: &SaliencyMap,
    s_rbd: &SaliencyMap,
) -> Result<SaliencyMap> {
    let cache = forward_cached(params, concat_inputs(s_deep, s_rbd)?)?;
    let probs = softmax2(&cache.logits)?;
    let values = probs.data().chunks_exact(2).map(|px| px[1]).collect();
    SaliencyMap::new(s_deep.height(), s_deep.width(), values, Provenance::Fused)
}
