//! Forward and backward passes for the network's building blocks.
//!
//! Convolutions are cross-correlations with zero same-padding; kernel spatial
//! dimensions must be odd so the padding is symmetric.

use crate::error::{Error, Result};

use super::tensor::{ConvKernel, Tensor};

fn check_conv_shapes(input: &Tensor, kernel: &ConvKernel, bias: Option<&[f64]>) -> Result<()> {
    if kernel.kh().is_multiple_of(2) || kernel.kw().is_multiple_of(2) {
        return Err(Error::ShapeMismatch {
            reason: format!(
                "kernel spatial dims must be odd, got {}x{}",
                kernel.kh(),
                kernel.kw()
            ),
        });
    }
    if kernel.cin() != input.channels() {
        return Err(Error::ShapeMismatch {
            reason: format!(
                "kernel expects {} input channels, tensor has {}",
                kernel.cin(),
                input.channels()
            ),
        });
    }
    if let Some(bias) = bias {
        if bias.len() != kernel.cout() {
            return Err(Error::ShapeMismatch {
                reason: format!(
                    "bias has {} entries for {} output channels",
                    bias.len(),
                    kernel.cout()
                ),
            });
        }
    }
    Ok(())
}

/// Same-padded cross-correlation plus per-channel bias.
pub fn conv2d_forward(input: &Tensor, kernel: &ConvKernel, bias: &[f64]) -> Result<Tensor> {
    check_conv_shapes(input, kernel, Some(bias))?;
    let (h, w) = (input.height(), input.width());
    let (cin, cout) = (kernel.cin(), kernel.cout());
    let (rh, rw) = (kernel.kh() / 2, kernel.kw() / 2);
    let mut out = Tensor::zeros(h, w, cout);
    let kdata = kernel.data();
    let idata = input.data();
    let odata = out.data_mut();
    let mut acc = vec![0.0f64; cout];
    for y in 0..h {
        for x in 0..w {
            acc.copy_from_slice(bias);
            for ky in 0..kernel.kh() {
                let iy = y + ky;
                if iy < rh || iy - rh >= h {
                    continue;
                }
                let iy = iy - rh;
                for kx in 0..kernel.kw() {
                    let ix = x + kx;
                    if ix < rw || ix - rw >= w {
                        continue;
                    }
                    let ix = ix - rw;
                    let in_base = (iy * w + ix) * cin;
                    for ci in 0..cin {
                        let v = idata[in_base + ci];
                        let run = kernel.run_offset(ky, kx, ci);
                        for (co, a) in acc.iter_mut().enumerate() {
                            *a += v * kdata[run + co];
                        }
                    }
                }
            }
            odata[(y * w + x) * cout..(y * w + x + 1) * cout].copy_from_slice(&acc);
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`] with respect to input, kernel and bias.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: ConvKernel,
    pub bias: Vec<f64>,
}

/// Exact gradients of the forward map given the upstream gradient and the
/// cached forward input.
pub fn conv2d_backward(
    upstream: &Tensor,
    input: &Tensor,
    kernel: &ConvKernel,
) -> Result<ConvGrads> {
    check_conv_shapes(input, kernel, None)?;
    if upstream.height() != input.height()
        || upstream.width() != input.width()
        || upstream.channels() != kernel.cout()
    {
        return Err(Error::ShapeMismatch {
            reason: format!(
                "upstream {}x{}x{} incompatible with input {}x{} and {} output channels",
                upstream.height(),
                upstream.width(),
                upstream.channels(),
                input.height(),
                input.width(),
                kernel.cout()
            ),
        });
    }
    let (h, w) = (input.height(), input.width());
    let (cin, cout) = (kernel.cin(), kernel.cout());
    let (rh, rw) = (kernel.kh() / 2, kernel.kw() / 2);

    let mut d_input = Tensor::zeros(h, w, cin);
    let mut d_kernel = ConvKernel::zeros(kernel.kh(), kernel.kw(), cin, cout);
    let mut d_bias = vec![0.0f64; cout];

    let kdata = kernel.data();
    let idata = input.data();
    let udata = upstream.data();
    let dk = d_kernel.data_mut();
    let di = d_input.data_mut();

    for y in 0..h {
        for x in 0..w {
            let up_base = (y * w + x) * cout;
            for (co, db) in d_bias.iter_mut().enumerate() {
                *db += udata[up_base + co];
            }
            for ky in 0..kernel.kh() {
                let iy = y + ky;
                if iy < rh || iy - rh >= h {
                    continue;
                }
                let iy = iy - rh;
                for kx in 0..kernel.kw() {
                    let ix = x + kx;
                    if ix < rw || ix - rw >= w {
                        continue;
                    }
                    let ix = ix - rw;
                    let in_base = (iy * w + ix) * cin;
                    for ci in 0..cin {
                        let run = ((ky * kernel.kw() + kx) * cin + ci) * cout;
                        let v = idata[in_base + ci];
                        let mut acc = 0.0;
                        for co in 0..cout {
                            let g = udata[up_base + co];
                            dk[run + co] += v * g;
                            acc += kdata[run + co] * g;
                        }
                        di[in_base + ci] += acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: d_input,
        kernel: d_kernel,
        bias: d_bias,
    })
}

/// Elementwise max(0, x).
pub fn relu(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Upstream gradient masked by the sign of the pre-activation.
pub fn relu_backward(upstream: &Tensor, pre_activation: &Tensor) -> Tensor {
    let mut out = upstream.clone();
    for (g, &z) in out.data_mut().iter_mut().zip(pre_activation.data()) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
    out
}

/// Per-pixel 2-class softmax of a 2-channel logit tensor.
pub fn softmax2(logits: &Tensor) -> Result<Tensor> {
    if logits.channels() != 2 {
        return Err(Error::ShapeMismatch {
            reason: format!("softmax2 expects 2 channels, got {}", logits.channels()),
        });
    }
    let mut out = logits.clone();
    for px in out.data_mut().chunks_exact_mut(2) {
        let m = px[0].max(px[1]);
        let e0 = (px[0] - m).exp();
        let e1 = (px[1] - m).exp();
        let z = e0 + e1;
        px[0] = e0 / z;
        px[1] = e1 / z;
    }
    Ok(out)
}

/// Mean per-pixel 2-class softmax cross-entropy and its logit gradients.
///
/// `target` holds exactly 0.0 (background) or 1.0 (salient) per pixel; the
/// gradient is (softmax - one_hot) / pixel_count.
pub fn softmax_xent(logits: &Tensor, target: &[f64]) -> Result<(f64, Tensor)> {
    if logits.channels() != 2 {
        return Err(Error::ShapeMismatch {
            reason: format!("loss expects 2 logit channels, got {}", logits.channels()),
        });
    }
    let n = logits.height() * logits.width();
    if target.len() != n {
        return Err(Error::ShapeMismatch {
            reason: format!("target has {} pixels, logits have {n}", target.len()),
        });
    }
    for (i, &t) in target.iter().enumerate() {
        if t != 0.0 && t != 1.0 {
            return Err(Error::NonBinaryTarget { value: t, index: i });
        }
    }
    let mut grads = logits.clone();
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    for (px, &t) in grads.data_mut().chunks_exact_mut(2).zip(target) {
        let m = px[0].max(px[1]);
        let e0 = (px[0] - m).exp();
        let e1 = (px[1] - m).exp();
        let z = e0 + e1;
        let cls = t as usize;
        // -log softmax[cls] in a numerically stable form
        loss += z.ln() - (px[cls] - m);
        px[0] = (e0 / z - (1.0 - t)) * inv_n;
        px[1] = (e1 / z - t) * inv_n;
    }
    Ok((loss * inv_n, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tensor_of(h: usize, w: usize, c: usize, vals: &[f64]) -> Tensor {
        Tensor::from_data(h, w, c, vals.to_vec()).unwrap()
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let input = tensor_of(2, 3, 1, &[1.0, -2.0, 3.0, 4.0, 5.0, -6.0]);
        let kernel = ConvKernel::from_data(1, 1, 1, 1, vec![1.0]).unwrap();
        let out = conv2d_forward(&input, &kernel, &[0.0]).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn zero_kernel_yields_bias() {
        let input = tensor_of(3, 3, 2, &[0.5; 18]);
        let kernel = ConvKernel::zeros(3, 3, 2, 2);
        let out = conv2d_forward(&input, &kernel, &[0.25, -1.5]).unwrap();
        for px in out.data().chunks_exact(2) {
            assert_eq!(px, &[0.25, -1.5]);
        }
    }

    #[test]
    fn ones_kernel_window_sums() {
        let input = tensor_of(3, 3, 1, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let kernel = ConvKernel::from_data(3, 3, 1, 1, vec![1.0; 9]).unwrap();
        let out = conv2d_forward(&input, &kernel, &[0.0]).unwrap();
        assert_eq!(out.get(1, 1, 0), 45.0);
        assert_eq!(out.get(0, 0, 0), 12.0); // 1 + 2 + 4 + 5
        assert_eq!(out.get(2, 2, 0), 28.0); // 5 + 6 + 8 + 9
    }

    #[test]
    fn even_kernel_rejected() {
        let input = tensor_of(2, 2, 1, &[0.0; 4]);
        let kernel = ConvKernel::zeros(2, 2, 1, 1);
        assert!(conv2d_forward(&input, &kernel, &[0.0]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let input = tensor_of(4, 4, 2, &[0.3; 32]);
        let kernel = ConvKernel::from_data(3, 3, 2, 3, vec![0.1; 54]).unwrap();
        let upstream = Tensor::zeros(4, 4, 3);
        let grads = conv2d_backward(&upstream, &input, &kernel).unwrap();
        assert!(grads.input.data().iter().all(|&v| v == 0.0));
        assert!(grads.kernel.data().iter().all(|&v| v == 0.0));
        assert!(grads.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        // single pixel, 1x1 kernel: kernel-grad = upstream * input,
        // input-grad = upstream * kernel
        let input = tensor_of(1, 1, 1, &[3.0]);
        let kernel = ConvKernel::from_data(1, 1, 1, 1, vec![5.0]).unwrap();
        let upstream = tensor_of(1, 1, 1, &[2.0]);
        let grads = conv2d_backward(&upstream, &input, &kernel).unwrap();
        assert_eq!(grads.kernel.data(), &[6.0]);
        assert_eq!(grads.input.data(), &[10.0]);
        assert_eq!(grads.bias, vec![2.0]);
    }

    /// Scalar loss L = sum(upstream .* conv(input)) used for all finite
    /// difference checks below.
    fn fd_loss(input: &Tensor, kernel: &ConvKernel, bias: &[f64], upstream: &Tensor) -> f64 {
        let out = conv2d_forward(input, kernel, bias).unwrap();
        out.data()
            .iter()
            .zip(upstream.data())
            .map(|(o, u)| o * u)
            .sum()
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let eps = 1e-5;
        for _ in 0..5 {
            let (h, w, cin, cout) = (5, 5, 2, 3);
            let mut input = Tensor::zeros(h, w, cin);
            for v in input.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let mut kernel = ConvKernel::zeros(3, 3, cin, cout);
            for v in kernel.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let bias: Vec<f64> = (0..cout).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut upstream = Tensor::zeros(h, w, cout);
            for v in upstream.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }

            let grads = conv2d_backward(&upstream, &input, &kernel).unwrap();

            let rel = |a: f64, f: f64| (a - f).abs() / f.abs().max(a.abs()).max(1.0);

            for i in 0..input.data().len() {
                let mut plus = input.clone();
                plus.data_mut()[i] += eps;
                let mut minus = input.clone();
                minus.data_mut()[i] -= eps;
                let fd = (fd_loss(&plus, &kernel, &bias, &upstream)
                    - fd_loss(&minus, &kernel, &bias, &upstream))
                    / (2.0 * eps);
                assert!(rel(grads.input.data()[i], fd) <= 1e-5);
            }
            for i in 0..kernel.data().len() {
                let mut plus = kernel.clone();
                plus.data_mut()[i] += eps;
                let mut minus = kernel.clone();
                minus.data_mut()[i] -= eps;
                let fd = (fd_loss(&input, &plus, &bias, &upstream)
                    - fd_loss(&input, &minus, &bias, &upstream))
                    / (2.0 * eps);
                assert!(rel(grads.kernel.data()[i], fd) <= 1e-5);
            }
            for i in 0..bias.len() {
                let mut plus = bias.clone();
                plus[i] += eps;
                let mut minus = bias.clone();
                minus[i] -= eps;
                let fd = (fd_loss(&input, &kernel, &plus, &upstream)
                    - fd_loss(&input, &kernel, &minus, &upstream))
                    / (2.0 * eps);
                assert!(rel(grads.bias[i], fd) <= 1e-5);
            }
        }
    }

    #[test]
    fn equal_logits_cost_ln2() {
        let logits = Tensor::zeros(4, 4, 2);
        let target = vec![1.0; 16];
        let (loss, _) = softmax_xent(&logits, &target).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn saturated_margin_costs_nothing() {
        let mut logits = Tensor::zeros(2, 2, 2);
        for px in logits.data_mut().chunks_exact_mut(2) {
            px[1] = 20.0; // +20 on the correct class
        }
        let (loss, _) = softmax_xent(&logits, &[1.0; 4]).unwrap();
        assert!(loss < 1e-8, "loss {loss}");
    }

    #[test]
    fn softmax_xent_rejects_non_binary_target() {
        let logits = Tensor::zeros(1, 2, 2);
        let err = softmax_xent(&logits, &[0.0, 0.5]).unwrap_err();
        assert!(matches!(
            err,
            crate::error::Error::NonBinaryTarget { index: 1, .. }
        ));
    }

    #[test]
    fn xent_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let eps = 1e-5;
        let mut logits = Tensor::zeros(4, 4, 2);
        for v in logits.data_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        let target: Vec<f64> = (0..16).map(|_| rng.random_range(0..2) as f64).collect();
        let (_, grads) = softmax_xent(&logits, &target).unwrap();
        for i in 0..logits.data().len() {
            let mut plus = logits.clone();
            plus.data_mut()[i] += eps;
            let mut minus = logits.clone();
            minus.data_mut()[i] -= eps;
            let (lp, _) = softmax_xent(&plus, &target).unwrap();
            let (lm, _) = softmax_xent(&minus, &target).unwrap();
            let fd = (lp - lm) / (2.0 * eps);
            let a = grads.data()[i];
            let rel = (a - fd).abs() / fd.abs().max(a.abs()).max(1e-3);
            assert!(rel <= 1e-6, "logit {i}: analytic {a} vs fd {fd}");
        }
    }

    #[test]
    fn softmax2_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut logits = Tensor::zeros(6, 6, 2);
        for v in logits.data_mut() {
            *v = rng.random_range(-30.0..30.0);
        }
        let probs = softmax2(&logits).unwrap();
        for px in probs.data().chunks_exact(2) {
            assert!((px[0] + px[1] - 1.0).abs() <= 1e-12);
            assert!(px[0] > 0.0 && px[1] > 0.0);
        }
    }

    #[test]
    fn relu_masks_backward_pass() {
        let z = tensor_of(1, 4, 1, &[-1.0, 0.0, 2.0, -0.5]);
        let up = tensor_of(1, 4, 1, &[1.0, 1.0, 1.0, 1.0]);
        let a = relu(&z);
        assert_eq!(a.data(), &[0.0, 0.0, 2.0, 0.0]);
        let back = relu_backward(&up, &z);
        assert_eq!(back.data(), &[0.0, 0.0, 1.0, 0.0]);
    }
}
