//! Evaluation metrics: MSE on the 0-255 scale, PSNR, mean SSIM in the
//! reference configuration (11x11 Gaussian window, sigma 1.5, K1 = 0.01,
//! K2 = 0.03, L = 1), and airlight accuracy.
//!
//! The evaluation SSIM is deliberately a different beast from the training
//! loss: Gaussian-weighted statistics over the valid interior instead of a
//! uniform window with shrink-to-valid borders, and squared K constants.

use alloc::vec;
use alloc::vec::Vec;


use num_traits::Float;
use crate::error::{Error, Result};
use crate::guided::luminance;
use crate::tensor::{Real, Tensor};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Mean squared error with both images scaled to 0-255 before squaring.
pub fn mse_255<T: Real>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<f64> {
    pred.same_shape(gt, "mse_255")?;
    let mut sum = 0.0;
    for (&p, &g) in pred.data().iter().zip(gt.data().iter()) {
        let d = 255.0 * (p.to_f64_lossy() - g.to_f64_lossy());
        sum += d * d;
    }
    Ok(sum / pred.len() as f64)
}

/// PSNR in dB from a 0-255-scale MSE; zero error maps to +infinity.
pub fn psnr(mse_255_value: f64) -> Result<f64> {
    if mse_255_value < 0.0 {
        return Err(Error::InvalidParam {
            name: "mse",
            value: mse_255_value,
            constraint: "mse >= 0",
        });
    }
    if mse_255_value == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * Float::log10(65025.0 / mse_255_value))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = Float::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
        sum += *v;
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Separable valid-region Gaussian filter: (h, w) -> (h - 10, w - 10).
fn gauss_valid(plane: &[f64], h: usize, w: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let wv = w - SSIM_WINDOW + 1;
    let hv = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; h * wv];
    for y in 0..h {
        for x in 0..wv {
            let mut s = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                s += kv * plane[y * w + x + k];
            }
            horiz[y * wv + x] = s;
        }
    }
    let mut out = vec![0.0; hv * wv];
    for y in 0..hv {
        for x in 0..wv {
            let mut s = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                s += kv * horiz[(y + k) * wv + x];
            }
            out[y * wv + x] = s;
        }
    }
    out
}

/// Mean SSIM between two images in [0, 1]. RGB inputs are converted to
/// luminance first; single-channel inputs are compared directly.
pub fn ssim_eval<T: Real>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<f64> {
    pred.same_shape(gt, "ssim_eval")?;
    let (pred, gt) = if pred.channels() == 3 {
        (luminance(pred)?, luminance(gt)?)
    } else if pred.channels() == 1 {
        (pred.clone(), gt.clone())
    } else {
        return Err(Error::ShapeMismatch {
            context: "ssim_eval: 1- or 3-channel input",
            expected: crate::tensor::shape_str((pred.batch(), 3, pred.height(), pred.width())),
            got: crate::tensor::shape_str(pred.shape()),
        });
    };
    let (n, _, h, w) = pred.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ShapeMismatch {
            context: "ssim_eval: image smaller than the 11x11 window",
            expected: crate::tensor::shape_str((n, 1, SSIM_WINDOW, SSIM_WINDOW)),
            got: crate::tensor::shape_str(pred.shape()),
        });
    }
    let kernel = gaussian_window();
    // L = 1 for [0,1] data, so C = (K*L)^2 = K^2.
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let hw = h * w;
    let mut total = 0.0;
    for item in 0..n {
        let mut x = vec![0.0f64; hw];
        let mut y = vec![0.0f64; hw];
        for i in 0..hw {
            x[i] = pred.plane(item, 0)[i].to_f64_lossy();
            y[i] = gt.plane(item, 0)[i].to_f64_lossy();
        }
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a * b).collect();

        let mu_x = gauss_valid(&x, h, w, &kernel);
        let mu_y = gauss_valid(&y, h, w, &kernel);
        let m_xx = gauss_valid(&xx, h, w, &kernel);
        let m_yy = gauss_valid(&yy, h, w, &kernel);
        let m_xy = gauss_valid(&xy, h, w, &kernel);

        let mut sum = 0.0;
        for i in 0..mu_x.len() {
            let var_x = m_xx[i] - mu_x[i] * mu_x[i];
            let var_y = m_yy[i] - mu_y[i] * mu_y[i];
            let cov = m_xy[i] - mu_x[i] * mu_y[i];
            let num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2);
            let den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (var_x + var_y + c2);
            sum += num / den;
        }
        total += sum / mu_x.len() as f64;
    }
    Ok(total / n as f64)
}

/// Fraction of samples whose absolute airlight error is within `tol`
/// (inclusive at the boundary).
pub fn airlight_accuracy(pred: &[f64], gt: &[f64], tol: f64) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch {
            context: "airlight_accuracy: list lengths",
            expected: alloc::format!("{}", pred.len()),
            got: alloc::format!("{}", gt.len()),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParam {
            name: "tol",
            value: tol,
            constraint: "tol > 0",
        });
    }
    if pred.is_empty() {
        return Err(Error::DegenerateInput {
            context: "airlight_accuracy: empty lists",
        });
    }
    let hits = pred
        .iter()
        .zip(gt.iter())
        .filter(|(p, g)| (*p - *g).abs() <= tol)
        .count();
    Ok(hits as f64 / pred.len() as f64)
}
