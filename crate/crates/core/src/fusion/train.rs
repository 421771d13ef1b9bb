//! From-scratch trainer: SGD with momentum under a poly learning-rate decay,
//! Xavier-initialized kernels and zero biases.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::saliency::{Mask, SaliencyMap};

use super::ops::{conv2d_backward, relu_backward, softmax_xent};
use super::tensor::{ConvKernel, Tensor};
use super::{concat_inputs, forward_cached, Arch, FusionParams};

/// Optimizer settings.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub momentum: f64,
    /// Poly decay exponent.
    pub power: f64,
    pub max_iter: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            base_lr: 1e-4,
            momentum: 0.9,
            power: 0.9,
            max_iter: 1000,
            batch: 8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::InvalidConfig {
                reason: format!("base_lr must be positive and finite, got {}", self.base_lr),
            });
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig {
                reason: format!("momentum must lie in [0,1), got {}", self.momentum),
            });
        }
        if self.power <= 0.0 || self.power.is_nan() {
            return Err(Error::InvalidConfig {
                reason: format!("poly power must be positive, got {}", self.power),
            });
        }
        if self.max_iter == 0 || self.batch == 0 {
            return Err(Error::InvalidConfig {
                reason: "max_iter and batch must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Poly decay: base_lr * (1 - t / max_iter)^power.
pub fn poly_lr(cfg: &TrainConfig, t: usize) -> f64 {
    let frac = 1.0 - t as f64 / cfg.max_iter as f64;
    cfg.base_lr * frac.max(0.0).powf(cfg.power)
}

/// One training record: the two input maps plus the binary ground truth.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub deep: SaliencyMap,
    pub rbd: SaliencyMap,
    pub gt: Mask,
}

/// Final parameters plus the per-iteration mean batch loss.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: FusionParams,
    pub loss_trace: Vec<f64>,
}

struct Momentum {
    conv1: ConvKernel,
    bias1: Vec<f64>,
    conv2: ConvKernel,
    bias2: Vec<f64>,
}

/// Train the fusion network. All samples must share one map size; batches
/// cycle the dataset in seeded shuffled epochs, so a fixed seed and dataset
/// order reproduce the run bit for bit.
pub fn train(dataset: &[TrainSample], arch: Arch, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    arch.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (h, w) = (dataset[0].deep.height(), dataset[0].deep.width());
    for s in dataset {
        for (sh, sw) in [
            (s.deep.height(), s.deep.width()),
            (s.rbd.height(), s.rbd.width()),
            (s.gt.height(), s.gt.width()),
        ] {
            if (sh, sw) != (h, w) {
                return Err(Error::DimensionMismatch {
                    left_h: h,
                    left_w: w,
                    right_h: sh,
                    right_w: sw,
                });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = FusionParams::xavier_init_with(arch, &mut rng)?;
    let mut velocity = Momentum {
        conv1: ConvKernel::zeros(arch.k1, arch.k1, 2, arch.hidden),
        bias1: vec![0.0; arch.hidden],
        conv2: ConvKernel::zeros(arch.k2, arch.k2, arch.hidden, 2),
        bias2: vec![0.0; 2],
    };

    let targets: Vec<Vec<f64>> = dataset.iter().map(|s| s.gt.to_values()).collect();
    let inputs: Vec<Tensor> = dataset
        .iter()
        .map(|s| concat_inputs(&s.deep, &s.rbd))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut cursor = order.len(); // forces a shuffle before the first pick
    let mut loss_trace = Vec::with_capacity(cfg.max_iter);

    for t in 0..cfg.max_iter {
        let mut g_conv1 = ConvKernel::zeros(arch.k1, arch.k1, 2, arch.hidden);
        let mut g_bias1 = vec![0.0; arch.hidden];
        let mut g_conv2 = ConvKernel::zeros(arch.k2, arch.k2, arch.hidden, 2);
        let mut g_bias2 = vec![0.0; 2];
        let mut batch_loss = 0.0;

        for _ in 0..cfg.batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let idx = order[cursor];
            cursor += 1;

            let cache = forward_cached(&params, inputs[idx].clone())?;
            let (loss, d_logits) = softmax_xent(&cache.logits, &targets[idx])?;
            batch_loss += loss;

            let back2 = conv2d_backward(&d_logits, &cache.hidden, &params.conv2)?;
            let d_pre = relu_backward(&back2.input, &cache.pre_hidden);
            let back1 = conv2d_backward(&d_pre, &cache.input, &params.conv1)?;

            accumulate(g_conv1.data_mut(), back1.kernel.data());
            accumulate(&mut g_bias1, &back1.bias);
            accumulate(g_conv2.data_mut(), back2.kernel.data());
            accumulate(&mut g_bias2, &back2.bias);
        }

        let inv_batch = 1.0 / cfg.batch as f64;
        batch_loss *= inv_batch;
        if !batch_loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: t });
        }
        loss_trace.push(batch_loss);

        let lr = poly_lr(cfg, t);
        step(
            params.conv1.data_mut(),
            velocity.conv1.data_mut(),
            g_conv1.data(),
            cfg.momentum,
            lr * inv_batch,
        );
        step(
            &mut params.bias1,
            &mut velocity.bias1,
            &g_bias1,
            cfg.momentum,
            lr * inv_batch,
        );
        step(
            params.conv2.data_mut(),
            velocity.conv2.data_mut(),
            g_conv2.data(),
            cfg.momentum,
            lr * inv_batch,
        );
        step(
            &mut params.bias2,
            &mut velocity.bias2,
            &g_bias2,
            cfg.momentum,
            lr * inv_batch,
        );
    }

    Ok(TrainOutcome { params, loss_trace })
}

fn accumulate(into: &mut [f64], from: &[f64]) {
    for (a, b) in into.iter_mut().zip(from) {
        *a += b;
    }
}

/// v <- momentum * v - lr * g; w <- w + v.
fn step(weights: &mut [f64], velocity: &mut [f64], grads: &[f64], momentum: f64, lr: f64) {
    for ((w, v), g) in weights.iter_mut().zip(velocity.iter_mut()).zip(grads) {
        *v = momentum * *v - lr * g;
        *w += *v;
    }
}
