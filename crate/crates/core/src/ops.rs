//! Network layer primitives: same-padding convolution, ReLU, and channel
//! concatenation, each with an analytic backward pass.
//!
//! Convolution lowers each image to a patch matrix and runs the blocked
//! kernels from [`crate::gemm`]; `conv2d_reference` keeps the naive loop
//! around as the correctness oracle for that lowering.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gemm::gemm_nn;
use crate::tensor::{shape_str, Real, Tensor};

/// Convolution weights: kernel laid out (out_channels, in_channels, f, f)
/// plus one bias per output channel. The spatial support f must be odd so
/// zero padding of (f-1)/2 preserves the input resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T: Real> {
    kernel: Tensor<T>,
    bias: Vec<T>,
}

impl<T: Real> ConvParams<T> {
    pub fn new(kernel: Tensor<T>, bias: Vec<T>) -> Result<Self> {
        let (out_c, _in_c, fh, fw) = kernel.shape();
        if fh != fw || fh % 2 == 0 {
            return Err(Error::ShapeMismatch {
                context: "ConvParams::new",
                expected: format!("odd square spatial support"),
                got: format!("{fh}x{fw}"),
            });
        }
        if bias.len() != out_c {
            return Err(Error::ShapeMismatch {
                context: "ConvParams::new",
                expected: format!("{out_c} bias values"),
                got: format!("{}", bias.len()),
            });
        }
        Ok(ConvParams { kernel, bias })
    }

    #[inline]
    pub fn out_channels(&self) -> usize {
        self.kernel.batch()
    }
    #[inline]
    pub fn in_channels(&self) -> usize {
        self.kernel.channels()
    }
    #[inline]
    pub fn support(&self) -> usize {
        self.kernel.height()
    }
    #[inline]
    pub fn kernel(&self) -> &Tensor<T> {
        &self.kernel
    }
    #[inline]
    pub fn bias(&self) -> &[T] {
        &self.bias
    }
    #[inline]
    pub fn kernel_mut(&mut self) -> &mut Tensor<T> {
        &mut self.kernel
    }
    #[inline]
    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }
}

fn check_conv_shapes<T: Real>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<()> {
    if input.channels() != params.in_channels() {
        return Err(Error::ShapeMismatch {
            context: "conv2d: input channels vs kernel in_channels",
            expected: shape_str(params.kernel().shape()),
            got: shape_str(input.shape()),
        });
    }
    Ok(())
}

/// Reusable patch-matrix buffers. Convolutions process images in row
/// bands so these stay a few MB regardless of image size; the network
/// threads one scratch through all of its layer calls.
#[derive(Debug, Default)]
pub struct ConvScratch<T: Real> {
    patches: Vec<T>,
    patches_t: Vec<T>,
}

impl<T: Real> ConvScratch<T> {
    pub fn new() -> Self {
        ConvScratch {
            patches: Vec::new(),
            patches_t: Vec::new(),
        }
    }
}

fn ensure_len<T: Real>(buf: &mut Vec<T>, len: usize) {
    if buf.len() < len {
        buf.resize(len, T::zero());
    }
}

/// Output rows per band, sized so the patch matrix stays cache-friendly.
fn band_rows(w: usize) -> usize {
    (4096 / w).max(1)
}

/// Lower output rows [y0, y0+rows) of one image to the patch matrix
/// (c*f*f, rows*w): row (ci*f + ky)*f + kx holds the input plane ci
/// shifted by (ky, kx) relative to the pad, with zeros outside the image.
fn im2col_band<T: Real>(
    input: &Tensor<T>,
    item: usize,
    f: usize,
    y0: usize,
    rows: usize,
    patches: &mut [T],
) {
    let (_, c, h, w) = input.shape();
    let pad = (f - 1) / 2;
    let band = rows * w;
    debug_assert!(patches.len() >= c * f * f * band);
    for ci in 0..c {
        for ky in 0..f {
            for kx in 0..f {
                let q = (ci * f + ky) * f + kx;
                let dst_all = &mut patches[q * band..(q + 1) * band];
                // x + kx - pad in [0, w)
                let x0 = pad.saturating_sub(kx);
                let x1 = (w + pad - kx).min(w);
                for r in 0..rows {
                    let dst = &mut dst_all[r * w..(r + 1) * w];
                    let iy = y0 + r + ky;
                    if iy < pad || iy - pad >= h {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = input.row(item, ci, iy - pad);
                    dst[..x0].iter_mut().for_each(|v| *v = T::zero());
                    dst[x1..].iter_mut().for_each(|v| *v = T::zero());
                    if x0 < x1 {
                        dst[x0..x1].copy_from_slice(&src[x0 + kx - pad..x1 + kx - pad]);
                    }
                }
            }
        }
    }
}

/// Blocked transpose: src is (rows, cols) row-major, dst becomes
/// (cols, rows) row-major.
fn transpose_into<T: Real>(src: &[T], rows: usize, cols: usize, dst: &mut [T]) {
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    const B: usize = 32;
    let mut r0 = 0;
    while r0 < rows {
        let r1 = (r0 + B).min(rows);
        let mut c0 = 0;
        while c0 < cols {
            let c1 = (c0 + B).min(cols);
            for r in r0..r1 {
                for c in c0..c1 {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
            c0 = c1;
        }
        r0 = r1;
    }
}

/// The adjoint convolution kernel: channels swapped and the spatial taps
/// rotated 180 degrees, so grad_input is a plain forward conv of grad_out.
fn adjoint_params<T: Real>(params: &ConvParams<T>) -> ConvParams<T> {
    let (out_c, in_c, f, _) = params.kernel().shape();
    let mut flipped = Tensor::zeros(in_c, out_c, f, f);
    for o in 0..out_c {
        for ci in 0..in_c {
            for ky in 0..f {
                for kx in 0..f {
                    *flipped.at_mut(ci, o, f - 1 - ky, f - 1 - kx) =
                        params.kernel().at(o, ci, ky, kx);
                }
            }
        }
    }
    ConvParams::new(flipped, vec![T::zero(); in_c]).expect("adjoint keeps validity")
}

/// Stride-1, zero-padded ("same") convolution. Output spatial dims equal
/// input spatial dims; each output value is the kernel-windowed dot product
/// plus the channel bias.
pub fn conv2d_forward<T: Real>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<Tensor<T>> {
    conv2d_forward_with(input, params, &mut ConvScratch::new())
}

/// `conv2d_forward` with caller-owned scratch, for hot paths that chain
/// many layer calls.
pub fn conv2d_forward_with<T: Real>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    scratch: &mut ConvScratch<T>,
) -> Result<Tensor<T>> {
    check_conv_shapes(input, params)?;
    let (n, c, h, w) = input.shape();
    let out_c = params.out_channels();
    let f = params.support();
    let k = c * f * f;
    let hw = h * w;
    let band = band_rows(w);
    ensure_len(&mut scratch.patches, k * band * w);
    let mut out = Tensor::zeros(n, out_c, h, w);
    for item in 0..n {
        for o in 0..out_c {
            let b = params.bias()[o];
            out.plane_mut(item, o).iter_mut().for_each(|v| *v = b);
        }
        let base = item * out_c * hw;
        let mut y0 = 0;
        while y0 < h {
            let rows = band.min(h - y0);
            im2col_band(input, item, f, y0, rows, &mut scratch.patches);
            gemm_nn(
                out_c,
                k,
                rows * w,
                params.kernel().data(),
                k,
                &scratch.patches[..k * rows * w],
                &mut out.data_mut()[base + y0 * w..],
                hw,
            );
            y0 += rows;
        }
    }
    Ok(out)
}

/// Gradients of sum(grad_out . conv2d_forward(input)) with respect to the
/// input, the kernel, and the bias.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Vec<T>)> {
    conv2d_backward_with(input, params, grad_out, &mut ConvScratch::new())
}

/// `conv2d_backward` with caller-owned scratch.
pub fn conv2d_backward_with<T: Real>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
    scratch: &mut ConvScratch<T>,
) -> Result<(Tensor<T>, Tensor<T>, Vec<T>)> {
    // grad wrt input: plain convolution of grad_out with the adjoint kernel.
    let grad_input = conv2d_forward_with(grad_out, &adjoint_params(params), scratch)?;
    let (grad_kernel, grad_bias) = conv2d_backward_weights_with(input, params, grad_out, scratch)?;
    Ok((grad_input, grad_kernel, grad_bias))
}

/// Kernel and bias gradients only, for layers whose input gradient is
/// never consumed (the first layer of a network).
pub fn conv2d_backward_weights_with<T: Real>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
    scratch: &mut ConvScratch<T>,
) -> Result<(Tensor<T>, Vec<T>)> {
    check_conv_shapes(input, params)?;
    let (n, c, h, w) = input.shape();
    let out_c = params.out_channels();
    if grad_out.shape() != (n, out_c, h, w) {
        return Err(Error::ShapeMismatch {
            context: "conv2d_backward: grad_out",
            expected: shape_str((n, out_c, h, w)),
            got: shape_str(grad_out.shape()),
        });
    }
    let f = params.support();
    let k = c * f * f;
    let hw = h * w;

    let mut grad_kernel = Tensor::zeros(out_c, c, f, f);
    let mut grad_bias = vec![T::zero(); out_c];

    let band = band_rows(w);
    ensure_len(&mut scratch.patches, k * band * w);
    ensure_len(&mut scratch.patches_t, k * band * w);
    for item in 0..n {
        for o in 0..out_c {
            let mut s = T::zero();
            for &g in grad_out.plane(item, o) {
                s = s + g;
            }
            grad_bias[o] = grad_bias[o] + s;
        }
        let g_base = item * out_c * hw;
        let mut y0 = 0;
        while y0 < h {
            let rows = band.min(h - y0);
            let bn = rows * w;
            im2col_band(input, item, f, y0, rows, &mut scratch.patches);
            transpose_into(&scratch.patches[..k * bn], k, bn, &mut scratch.patches_t[..k * bn]);
            // dW += G_band * P_band^T
            gemm_nn(
                out_c,
                bn,
                k,
                &grad_out.data()[g_base + y0 * w..],
                hw,
                &scratch.patches_t[..k * bn],
                grad_kernel.data_mut(),
                k,
            );
            y0 += rows;
        }
    }
    Ok((grad_kernel, grad_bias))
}

/// Naive loop convolution, the reference the lowered path must match.
pub fn conv2d_reference<T: Real>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<Tensor<T>> {
    check_conv_shapes(input, params)?;
    let (n, c, h, w) = input.shape();
    let out_c = params.out_channels();
    let f = params.support();
    let pad = (f - 1) / 2;
    let mut out = Tensor::zeros(n, out_c, h, w);
    for item in 0..n {
        for o in 0..out_c {
            for y in 0..h {
                for x in 0..w {
                    let mut s = params.bias()[o];
                    for ci in 0..c {
                        for ky in 0..f {
                            for kx in 0..f {
                                let iy = y + ky;
                                let ix = x + kx;
                                if iy < pad || ix < pad || iy - pad >= h || ix - pad >= w {
                                    continue;
                                }
                                s = s + params.kernel().at(o, ci, ky, kx)
                                    * input.at(item, ci, iy - pad, ix - pad);
                            }
                        }
                    }
                    *out.at_mut(item, o, y, x) = s;
                }
            }
        }
    }
    Ok(out)
}

/// Elementwise max(0, x).
pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Backward of ReLU: pass grad where input > 0, zero elsewhere
/// (subgradient 0 at the kink).
pub fn relu_backward<T: Real>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    input.same_shape(grad_out, "relu_backward")?;
    let mut g = grad_out.clone();
    for (gv, iv) in g.data_mut().iter_mut().zip(input.data().iter()) {
        if *iv <= T::zero() {
            *gv = T::zero();
        }
    }
    Ok(g)
}

/// Stack inputs along the channel axis, in argument order.
pub fn concat_channels<T: Real>(inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    assert!(!inputs.is_empty(), "concat_channels needs at least one input");
    let (n, _, h, w) = inputs[0].shape();
    let mut total_c = 0;
    for t in inputs {
        let (tn, tc, th, tw) = t.shape();
        if (tn, th, tw) != (n, h, w) {
            return Err(Error::ShapeMismatch {
                context: "concat_channels: inputs must share (n, h, w)",
                expected: shape_str(inputs[0].shape()),
                got: shape_str(t.shape()),
            });
        }
        total_c += tc;
    }
    let mut out = Tensor::zeros(n, total_c, h, w);
    for item in 0..n {
        let mut co = 0;
        for t in inputs {
            for ci in 0..t.channels() {
                out.plane_mut(item, co).copy_from_slice(t.plane(item, ci));
                co += 1;
            }
        }
    }
    Ok(out)
}

/// Backward of concat: slice the gradient back into per-input channel ranges.
pub fn concat_backward<T: Real>(grad_out: &Tensor<T>, channels: &[usize]) -> Result<Vec<Tensor<T>>> {
    let (n, c, h, w) = grad_out.shape();
    let total: usize = channels.iter().sum();
    if total != c {
        return Err(Error::ShapeMismatch {
            context: "concat_backward: channel split",
            expected: format!("{total} channels"),
            got: format!("{c} channels"),
        });
    }
    let mut parts = Vec::with_capacity(channels.len());
    let mut c0 = 0;
    for &pc in channels {
        let mut part = Tensor::zeros(n, pc, h, w);
        for item in 0..n {
            for ci in 0..pc {
                part.plane_mut(item, ci)
                    .copy_from_slice(grad_out.plane(item, c0 + ci));
            }
        }
        c0 += pc;
        parts.push(part);
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_kernel(channels: usize, f: usize) -> ConvParams<f64> {
        let mut kernel = Tensor::zeros(channels, channels, f, f);
        let mid = f / 2;
        for o in 0..channels {
            *kernel.at_mut(o, o, mid, mid) = 1.0;
        }
        ConvParams::new(kernel, vec![0.0; channels]).unwrap()
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let input =
            Tensor::from_vec(1, 1, 3, 3, (0..9).map(|i| i as f64 * 0.5 - 2.0).collect()).unwrap();
        let params = identity_kernel(1, 3);
        let out = conv2d_forward(&input, &params).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn ones_kernel_counts_padded_window() {
        // Constant 2.0 input under an all-ones 3x3 kernel: interior pixels see
        // the full 9-cell window (18.0), corners only 4 cells (8.0), edges 6.
        let input = Tensor::filled(1, 1, 4, 5, 2.0);
        let kernel = Tensor::filled(1, 1, 3, 3, 1.0);
        let params = ConvParams::new(kernel, vec![0.0]).unwrap();
        let out = conv2d_forward(&input, &params).unwrap();
        assert_eq!(out.at(0, 0, 1, 2), 18.0);
        assert_eq!(out.at(0, 0, 0, 0), 8.0);
        assert_eq!(out.at(0, 0, 3, 4), 8.0);
        assert_eq!(out.at(0, 0, 0, 2), 12.0);
    }

    #[test]
    fn zero_kernel_emits_bias() {
        let input = Tensor::from_vec(2, 3, 4, 4, (0..96).map(|i| i as f64).collect()).unwrap();
        let kernel = Tensor::zeros(2, 3, 3, 3);
        let params = ConvParams::new(kernel, vec![0.7, 0.7]).unwrap();
        let out = conv2d_forward(&input, &params).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn channel_mismatch_names_both_shapes() {
        let input = Tensor::<f64>::zeros(1, 2, 4, 4);
        let params = identity_kernel(3, 3);
        let err = conv2d_forward(&input, &params).unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("(3, 3, 3, 3)") && msg.contains("(1, 2, 4, 4)"), "{msg}");
    }

    #[test]
    fn even_support_rejected() {
        let kernel = Tensor::<f64>::zeros(1, 1, 2, 2);
        assert!(ConvParams::new(kernel, vec![0.0]).is_err());
    }

    #[test]
    fn lowered_path_matches_reference() {
        let input = Tensor::from_vec(
            2,
            3,
            6,
            7,
            (0..2 * 3 * 6 * 7).map(|i| ((i * 37) % 23) as f64 * 0.09 - 1.0).collect(),
        )
        .unwrap();
        let kernel = Tensor::from_vec(
            4,
            3,
            5,
            5,
            (0..4 * 3 * 25).map(|i| ((i * 13) % 17) as f64 * 0.11 - 0.9).collect(),
        )
        .unwrap();
        let params = ConvParams::new(kernel, vec![0.1, -0.2, 0.3, 0.0]).unwrap();
        let fast = conv2d_forward(&input, &params).unwrap();
        let slow = conv2d_reference(&input, &params).unwrap();
        for (a, b) in fast.data().iter().zip(slow.data().iter()) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
        }
    }

    #[test]
    fn backward_identity_kernel_passes_grad_through() {
        let input = Tensor::from_vec(1, 1, 3, 3, (0..9).map(|i| i as f64).collect()).unwrap();
        let params = identity_kernel(1, 3);
        let grad = Tensor::from_vec(1, 1, 3, 3, (0..9).map(|i| (i as f64) * 0.1).collect()).unwrap();
        let (gi, _gk, gb) = conv2d_backward(&input, &params, &grad).unwrap();
        assert_eq!(gi, grad);
        let expect: f64 = grad.data().iter().sum();
        assert!((gb[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn grad_bias_is_per_channel_sum() {
        let input = Tensor::<f64>::filled(2, 2, 3, 3, 0.5);
        let kernel = Tensor::filled(3, 2, 3, 3, 0.1);
        let params = ConvParams::new(kernel, vec![0.0; 3]).unwrap();
        let mut grad = Tensor::zeros(2, 3, 3, 3);
        for item in 0..2 {
            for o in 0..3 {
                let fill = (item * 3 + o) as f64;
                grad.plane_mut(item, o).iter_mut().for_each(|v| *v = fill);
            }
        }
        let (_, _, gb) = conv2d_backward(&input, &params, &grad).unwrap();
        // channel o sums fill over 9 pixels and both batch items
        assert_eq!(gb[0], (0.0 + 3.0) * 9.0);
        assert_eq!(gb[1], (1.0 + 4.0) * 9.0);
        assert_eq!(gb[2], (2.0 + 5.0) * 9.0);
    }

    #[test]
    fn relu_clamps_and_masks() {
        let input = Tensor::from_vec(1, 1, 1, 3, vec![-1.0, 0.0, 2.0]).unwrap();
        let out = relu(&input);
        assert_eq!(out.data(), &[0.0, 0.0, 2.0]);

        let pos = Tensor::from_vec(1, 1, 1, 3, vec![0.5, 1.0, 2.0]).unwrap();
        assert_eq!(relu(&pos), pos);

        let input = Tensor::from_vec(1, 1, 1, 2, vec![-1.0, 2.0]).unwrap();
        let grad = Tensor::from_vec(1, 1, 1, 2, vec![5.0, 5.0]).unwrap();
        let g = relu_backward(&input, &grad).unwrap();
        assert_eq!(g.data(), &[0.0, 5.0]);
    }

    #[test]
    fn concat_stacks_and_splits() {
        let a = Tensor::<f64>::filled(1, 16, 2, 2, 1.0);
        let b = Tensor::<f64>::filled(1, 16, 2, 2, 2.0);
        let c = Tensor::<f64>::filled(1, 16, 2, 2, 3.0);
        let out = concat_channels(&[&a, &b, &c]).unwrap();
        assert_eq!(out.shape(), (1, 48, 2, 2));
        assert_eq!(out.at(0, 0, 0, 0), 1.0);
        assert_eq!(out.at(0, 16, 0, 0), 2.0);
        assert_eq!(out.at(0, 47, 1, 1), 3.0);

        let single = concat_channels(&[&a]).unwrap();
        assert_eq!(single, a);

        let parts = concat_backward(&out, &[16, 16, 16]).unwrap();
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
        assert_eq!(parts[2], c);
    }

    #[test]
    fn concat_rejects_spatial_mismatch() {
        let a = Tensor::<f64>::zeros(1, 4, 2, 2);
        let b = Tensor::<f64>::zeros(1, 4, 3, 2);
        assert!(concat_channels(&[&a, &b]).is_err());
    }
}
