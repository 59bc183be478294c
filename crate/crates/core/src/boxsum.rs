//! Summed-area table over one image plane. Window sums and in-bounds
//! counts come out in O(1) per pixel, which makes every box filter in the
//! crate O(HW) regardless of radius. Accumulation is always f64 so the
//! f32 production path keeps full window-statistics accuracy.

use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::Real;

pub(crate) struct SummedArea {
    sat: Vec<f64>,
    h: usize,
    w: usize,
}

impl SummedArea {
    /// Build from a contiguous (h, w) plane.
    pub fn new<T: Real>(plane: &[T], h: usize, w: usize) -> Self {
        debug_assert_eq!(plane.len(), h * w);
        let stride = w + 1;
        let mut sat = vec![0.0f64; (h + 1) * stride];
        for y in 0..h {
            let mut row_sum = 0.0;
            for x in 0..w {
                row_sum += plane[y * w + x].to_f64_lossy();
                sat[(y + 1) * stride + (x + 1)] = sat[y * stride + (x + 1)] + row_sum;
            }
        }
        SummedArea { sat, h, w }
    }

    /// Build from an f64 scratch plane.
    pub fn from_f64(plane: &[f64], h: usize, w: usize) -> Self {
        Self::new::<f64>(plane, h, w)
    }

    /// Sum over the window of `radius` around (y, x), clipped to bounds.
    #[inline]
    pub fn window_sum(&self, y: usize, x: usize, radius: usize) -> f64 {
        let y0 = y.saturating_sub(radius);
        let x0 = x.saturating_sub(radius);
        let y1 = (y + radius + 1).min(self.h);
        let x1 = (x + radius + 1).min(self.w);
        let s = w1(self.w);
        self.sat[y1 * s + x1] - self.sat[y0 * s + x1] - self.sat[y1 * s + x0]
            + self.sat[y0 * s + x0]
    }
}

#[inline]
fn w1(w: usize) -> usize {
    w + 1
}

/// Number of in-bounds pixels in the clipped window around (y, x).
#[inline]
pub(crate) fn window_count(h: usize, w: usize, y: usize, x: usize, radius: usize) -> f64 {
    let y0 = y.saturating_sub(radius);
    let x0 = x.saturating_sub(radius);
    let y1 = (y + radius + 1).min(h);
    let x1 = (x + radius + 1).min(w);
    ((y1 - y0) * (x1 - x0)) as f64
}

/// Count-normalized box mean of an f64 plane, written into `out`.
pub(crate) fn box_mean_f64(plane: &[f64], h: usize, w: usize, radius: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), h * w);
    let sat = SummedArea::from_f64(plane, h, w);
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = sat.window_sum(y, x, radius) / window_count(h, w, y, x, radius);
        }
    }
}
