//! Training objectives: windowed SSIM loss for the airlight head, MSE loss
//! for the transmission head, and their unit-weight sum.
//!
//! SSIM statistics use a uniform window with shrink-to-valid borders: near
//! an edge the mean and (co)variance are taken over the in-bounds pixels
//! only, so constant inputs score identically everywhere. Gradients are
//! analytic and expressed through box sums, keeping the backward pass O(HW).

use alloc::vec;
use alloc::vec::Vec;

use crate::boxsum::{window_count, SummedArea};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// SSIM loss configuration: uniform square window plus the two stabilizing
/// constants, used literally in the per-pixel formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 13,
            c1: 0.02,
            c2: 0.03,
        }
    }
}

impl SsimParams {
    fn validate(&self) -> Result<()> {
        if self.window % 2 == 0 || self.window == 0 {
            return Err(Error::InvalidParam {
                name: "ssim window",
                value: self.window as f64,
                constraint: "odd and >= 1",
            });
        }
        if !(self.c1 > 0.0) || !(self.c2 > 0.0) {
            return Err(Error::InvalidParam {
                name: "ssim constants",
                value: self.c1.min(self.c2),
                constraint: "C1, C2 > 0",
            });
        }
        Ok(())
    }
}

struct PlaneStats {
    mean_x: Vec<f64>,
    mean_y: Vec<f64>,
    var_x: Vec<f64>,
    var_y: Vec<f64>,
    cov: Vec<f64>,
}

fn plane_stats<T: Real>(
    x: &[T],
    y: &[T],
    h: usize,
    w: usize,
    radius: usize,
) -> PlaneStats {
    let hw = h * w;
    let xf: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
    let yf: Vec<f64> = y.iter().map(|v| v.to_f64_lossy()).collect();
    let xx: Vec<f64> = xf.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = yf.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = xf.iter().zip(yf.iter()).map(|(a, b)| a * b).collect();

    let sat_x = SummedArea::from_f64(&xf, h, w);
    let sat_y = SummedArea::from_f64(&yf, h, w);
    let sat_xx = SummedArea::from_f64(&xx, h, w);
    let sat_yy = SummedArea::from_f64(&yy, h, w);
    let sat_xy = SummedArea::from_f64(&xy, h, w);

    let mut out = PlaneStats {
        mean_x: vec![0.0; hw],
        mean_y: vec![0.0; hw],
        var_x: vec![0.0; hw],
        var_y: vec![0.0; hw],
        cov: vec![0.0; hw],
    };
    for yim in 0..h {
        for xim in 0..w {
            let p = yim * w + xim;
            let count = window_count(h, w, yim, xim, radius);
            let mx = sat_x.window_sum(yim, xim, radius) / count;
            let my = sat_y.window_sum(yim, xim, radius) / count;
            out.mean_x[p] = mx;
            out.mean_y[p] = my;
            out.var_x[p] = sat_xx.window_sum(yim, xim, radius) / count - mx * mx;
            out.var_y[p] = sat_yy.window_sum(yim, xim, radius) / count - my * my;
            out.cov[p] = sat_xy.window_sum(yim, xim, radius) / count - mx * my;
        }
    }
    out
}

#[inline]
fn ssim_value(stats: &PlaneStats, p: usize, c1: f64, c2: f64) -> f64 {
    let a_num = 2.0 * stats.mean_x[p] * stats.mean_y[p] + c1;
    let a_den = stats.mean_x[p] * stats.mean_x[p] + stats.mean_y[p] * stats.mean_y[p] + c1;
    let b_num = 2.0 * stats.cov[p] + c2;
    let b_den = stats.var_x[p] + stats.var_y[p] + c2;
    (a_num / a_den) * (b_num / b_den)
}

fn check_map_pair<T: Real>(pred: &Tensor<T>, target: &Tensor<T>, context: &'static str) -> Result<()> {
    pred.same_shape(target, context)?;
    if pred.channels() != 1 {
        return Err(Error::ShapeMismatch {
            context,
            expected: crate::tensor::shape_str((pred.batch(), 1, pred.height(), pred.width())),
            got: crate::tensor::shape_str(pred.shape()),
        });
    }
    Ok(())
}

/// Per-pixel SSIM between two single-channel maps.
pub fn ssim_map<T: Real>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    params: &SsimParams,
) -> Result<Tensor<T>> {
    params.validate()?;
    check_map_pair(pred, target, "ssim_map")?;
    let (n, _, h, w) = pred.shape();
    let radius = params.window / 2;
    let mut out = Tensor::zeros(n, 1, h, w);
    for item in 0..n {
        let stats = plane_stats(pred.plane(item, 0), target.plane(item, 0), h, w, radius);
        let dst = out.plane_mut(item, 0);
        for p in 0..h * w {
            dst[p] = T::from_f64(ssim_value(&stats, p, params.c1, params.c2));
        }
    }
    Ok(out)
}

/// SSIM loss over a batch: mean over items of (1 - mean per-pixel SSIM),
/// plus the analytic gradient with respect to `pred`.
pub fn ssim_loss<T: Real>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    params: &SsimParams,
) -> Result<(f64, Tensor<T>)> {
    params.validate()?;
    check_map_pair(pred, target, "ssim_loss")?;
    let (n, _, h, w) = pred.shape();
    let radius = params.window / 2;
    let hw = h * w;
    let m = hw as f64;
    let scale = -1.0 / (n as f64 * m);
    let (c1, c2) = (params.c1, params.c2);

    let mut total = 0.0;
    let mut grad = Tensor::zeros(n, 1, h, w);
    // Per-pixel gradient fields, each later box-summed over the windows that
    // contain the pixel (the window relation is symmetric):
    //   dSSIM(p)/dx(q) = w_p * [Dmu + Dcov*(y(q)-mu_y) + 2*Dvar*(x(q)-mu_x)]
    let mut f_mu = vec![0.0f64; hw];
    let mut f_cov = vec![0.0f64; hw];
    let mut f_cov_my = vec![0.0f64; hw];
    let mut f_var = vec![0.0f64; hw];
    let mut f_var_mx = vec![0.0f64; hw];
    for item in 0..n {
        let xs = pred.plane(item, 0);
        let ys = target.plane(item, 0);
        let stats = plane_stats(xs, ys, h, w, radius);

        let mut item_sum = 0.0;
        for yim in 0..h {
            for xim in 0..w {
                let p = yim * w + xim;
                let a_num = 2.0 * stats.mean_x[p] * stats.mean_y[p] + c1;
                let a_den =
                    stats.mean_x[p] * stats.mean_x[p] + stats.mean_y[p] * stats.mean_y[p] + c1;
                let b_num = 2.0 * stats.cov[p] + c2;
                let b_den = stats.var_x[p] + stats.var_y[p] + c2;
                let a = a_num / a_den;
                let b = b_num / b_den;
                item_sum += a * b;

                let wgt = 1.0 / window_count(h, w, yim, xim, radius);
                let d_mu = b * (2.0 * stats.mean_y[p] * a_den - a_num * 2.0 * stats.mean_x[p])
                    / (a_den * a_den);
                let d_cov = a * 2.0 / b_den;
                let d_var = a * (-b_num / (b_den * b_den));
                f_mu[p] = wgt * d_mu;
                f_cov[p] = wgt * d_cov;
                f_cov_my[p] = wgt * d_cov * stats.mean_y[p];
                f_var[p] = wgt * d_var;
                f_var_mx[p] = wgt * d_var * stats.mean_x[p];
            }
        }
        total += 1.0 - item_sum / m;

        let sat_mu = SummedArea::from_f64(&f_mu, h, w);
        let sat_cov = SummedArea::from_f64(&f_cov, h, w);
        let sat_cov_my = SummedArea::from_f64(&f_cov_my, h, w);
        let sat_var = SummedArea::from_f64(&f_var, h, w);
        let sat_var_mx = SummedArea::from_f64(&f_var_mx, h, w);
        let gplane = grad.plane_mut(item, 0);
        for yim in 0..h {
            for xim in 0..w {
                let q = yim * w + xim;
                let xq = xs[q].to_f64_lossy();
                let yq = ys[q].to_f64_lossy();
                let s = sat_mu.window_sum(yim, xim, radius)
                    + yq * sat_cov.window_sum(yim, xim, radius)
                    - sat_cov_my.window_sum(yim, xim, radius)
                    + 2.0 * (xq * sat_var.window_sum(yim, xim, radius)
                        - sat_var_mx.window_sum(yim, xim, radius));
                gplane[q] = T::from_f64(scale * s);
            }
        }
    }
    Ok((total / n as f64, grad))
}

/// Mean squared error over all elements, with gradient 2*(pred-target)/count.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    pred.same_shape(target, "mse_loss")?;
    let count = pred.len() as f64;
    let mut sum = 0.0;
    let mut grad = Tensor::zeros(pred.batch(), pred.channels(), pred.height(), pred.width());
    for ((g, &p), &t) in grad
        .data_mut()
        .iter_mut()
        .zip(pred.data().iter())
        .zip(target.data().iter())
    {
        let d = p.to_f64_lossy() - t.to_f64_lossy();
        sum += d * d;
        *g = T::from_f64(2.0 * d / count);
    }
    Ok((sum / count, grad))
}

/// L_total = L_SSIM + L_MSE with unit weights.
pub fn total_loss(ssim_part: f64, mse_part: f64) -> Result<f64> {
    if !ssim_part.is_finite() || !mse_part.is_finite() {
        return Err(Error::NonFiniteValue {
            context: "total_loss",
        });
    }
    Ok(ssim_part + mse_part)
}
