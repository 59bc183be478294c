//! Guided image filtering for transmission-map refinement, built on
//! summed-area-table box means with clipped windows and count
//! normalization at the borders.

use alloc::vec;

use crate::boxsum::box_mean_f64;
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidedFilterParams {
    /// Window side is 2*radius + 1.
    pub radius: usize,
    /// Regularization added to the window variance of the guide.
    pub eps: f64,
}

impl Default for GuidedFilterParams {
    fn default() -> Self {
        // 33x33 window; eps 1e-3 is the usual setting for [0,1] intensities.
        GuidedFilterParams {
            radius: 16,
            eps: 1e-3,
        }
    }
}

impl GuidedFilterParams {
    fn validate(&self) -> Result<()> {
        if self.radius == 0 {
            return Err(Error::InvalidParam {
                name: "radius",
                value: 0.0,
                constraint: "radius >= 1",
            });
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidParam {
                name: "eps",
                value: self.eps,
                constraint: "eps >= 0",
            });
        }
        Ok(())
    }
}

fn check_single_channel<T: Real>(t: &Tensor<T>, context: &'static str) -> Result<()> {
    if t.channels() != 1 {
        return Err(Error::ShapeMismatch {
            context,
            expected: crate::tensor::shape_str((t.batch(), 1, t.height(), t.width())),
            got: crate::tensor::shape_str(t.shape()),
        });
    }
    Ok(())
}

/// Per-pixel mean over the (2r+1)^2 window clipped to image bounds.
pub fn box_filter<T: Real>(img: &Tensor<T>, radius: usize) -> Result<Tensor<T>> {
    check_single_channel(img, "box_filter")?;
    let (n, _, h, w) = img.shape();
    let mut out = Tensor::zeros(n, 1, h, w);
    let mut plane = vec![0.0f64; h * w];
    let mut mean = vec![0.0f64; h * w];
    for item in 0..n {
        for (dst, src) in plane.iter_mut().zip(img.plane(item, 0).iter()) {
            *dst = src.to_f64_lossy();
        }
        box_mean_f64(&plane, h, w, radius, &mut mean);
        for (dst, &src) in out.plane_mut(item, 0).iter_mut().zip(mean.iter()) {
            *dst = T::from_f64(src);
        }
    }
    Ok(out)
}

/// Edge-preserving filter: fits a_k*guide + b_k per window with
/// a_k = cov(guide, input) / (var(guide) + eps), then averages the
/// coefficients of all windows covering each pixel.
pub fn guided_filter<T: Real>(
    guide: &Tensor<T>,
    input: &Tensor<T>,
    params: &GuidedFilterParams,
) -> Result<Tensor<T>> {
    params.validate()?;
    guide.same_shape(input, "guided_filter")?;
    check_single_channel(guide, "guided_filter")?;
    let (n, _, h, w) = guide.shape();
    let hw = h * w;
    let r = params.radius;

    let mut out = Tensor::zeros(n, 1, h, w);
    let mut g = vec![0.0f64; hw];
    let mut p = vec![0.0f64; hw];
    let mut gg = vec![0.0f64; hw];
    let mut gp = vec![0.0f64; hw];
    let mut mean_g = vec![0.0f64; hw];
    let mut mean_p = vec![0.0f64; hw];
    let mut mean_gg = vec![0.0f64; hw];
    let mut mean_gp = vec![0.0f64; hw];
    let mut a = vec![0.0f64; hw];
    let mut b = vec![0.0f64; hw];
    let mut mean_a = vec![0.0f64; hw];
    let mut mean_b = vec![0.0f64; hw];
    for item in 0..n {
        for i in 0..hw {
            g[i] = guide.plane(item, 0)[i].to_f64_lossy();
            p[i] = input.plane(item, 0)[i].to_f64_lossy();
            gg[i] = g[i] * g[i];
            gp[i] = g[i] * p[i];
        }
        box_mean_f64(&g, h, w, r, &mut mean_g);
        box_mean_f64(&p, h, w, r, &mut mean_p);
        box_mean_f64(&gg, h, w, r, &mut mean_gg);
        box_mean_f64(&gp, h, w, r, &mut mean_gp);
        for i in 0..hw {
            let var = mean_gg[i] - mean_g[i] * mean_g[i];
            let cov = mean_gp[i] - mean_g[i] * mean_p[i];
            a[i] = cov / (var + params.eps);
            b[i] = mean_p[i] - a[i] * mean_g[i];
        }
        box_mean_f64(&a, h, w, r, &mut mean_a);
        box_mean_f64(&b, h, w, r, &mut mean_b);
        let dst = out.plane_mut(item, 0);
        for i in 0..hw {
            dst[i] = T::from_f64(mean_a[i] * g[i] + mean_b[i]);
        }
    }
    Ok(out)
}

/// BT.601 luminance of an RGB tensor.
pub fn luminance<T: Real>(rgb: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = rgb.shape();
    if c != 3 {
        return Err(Error::ShapeMismatch {
            context: "luminance: RGB input required",
            expected: crate::tensor::shape_str((n, 3, h, w)),
            got: crate::tensor::shape_str(rgb.shape()),
        });
    }
    let mut out = Tensor::zeros(n, 1, h, w);
    for item in 0..n {
        let rp = rgb.plane(item, 0);
        let gp = rgb.plane(item, 1);
        let bp = rgb.plane(item, 2);
        let dst = out.plane_mut(item, 0);
        for i in 0..h * w {
            let y = 0.299 * rp[i].to_f64_lossy()
                + 0.587 * gp[i].to_f64_lossy()
                + 0.114 * bp[i].to_f64_lossy();
            dst[i] = T::from_f64(y);
        }
    }
    Ok(out)
}

/// Refine a coarse transmission map against the hazy image: the guide is
/// the luminance of the hazy image, and both the input and the output are
/// clipped to [0, 1].
pub fn refine_transmission<T: Real>(
    hazy_rgb: &Tensor<T>,
    coarse_t: &Tensor<T>,
    params: &GuidedFilterParams,
) -> Result<Tensor<T>> {
    let guide = luminance(hazy_rgb)?;
    let clipped = coarse_t.clamp(T::zero(), T::one());
    let refined = guided_filter(&guide, &clipped, params)?;
    Ok(refined.clamp(T::zero(), T::one()))
}
