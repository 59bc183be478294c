//! Shared finite-difference helpers for the gradient-check suites.

/// Relative error with a guard for near-zero pairs: values whose magnitudes
/// both sit below `floor` compare as equal.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < floor {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Central finite difference of a scalar function of one perturbed value.
pub fn central_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
