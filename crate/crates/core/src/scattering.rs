//! The atmospheric scattering model: haze synthesis from transmission and
//! airlight, depth-to-transmission decay, and the inversion that recovers a
//! haze-free image.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Scattering parameters. The airlight is a single scalar applied to all
/// RGB channels; `t_floor` bounds the division during inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterParams {
    pub beta: f64,
    pub airlight: f64,
    pub t_floor: f64,
}

impl ScatterParams {
    pub fn new(beta: f64, airlight: f64, t_floor: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParam {
                name: "beta",
                value: beta,
                constraint: "beta > 0",
            });
        }
        if !(0.0..=1.0).contains(&airlight) {
            return Err(Error::InvalidParam {
                name: "airlight",
                value: airlight,
                constraint: "0 <= airlight <= 1",
            });
        }
        if !(t_floor > 0.0 && t_floor < 1.0) {
            return Err(Error::InvalidParam {
                name: "t_floor",
                value: t_floor,
                constraint: "0 < t_floor < 1",
            });
        }
        Ok(ScatterParams {
            beta,
            airlight,
            t_floor,
        })
    }
}

/// t(x) = exp(-beta * d(x)) for depth d in [0, 1]; output in (0, 1].
pub fn transmission_from_depth<T: Real>(depth: &Tensor<T>, beta: f64) -> Result<Tensor<T>> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParam {
            name: "beta",
            value: beta,
            constraint: "beta > 0",
        });
    }
    let b = T::from_f64(beta);
    Ok(depth.map(|d| (-b * d).exp()))
}

/// I = J*t + B*(1 - t), clipped to [0, 1]. The transmission map has one
/// channel and broadcasts over the RGB channels of `clean`.
pub fn synthesize_hazy<T: Real>(
    clean: &Tensor<T>,
    transmission: &Tensor<T>,
    airlight: f64,
) -> Result<Tensor<T>> {
    check_broadcast(clean, transmission, "synthesize_hazy")?;
    let b = T::from_f64(airlight);
    let one = T::one();
    let mut out = clean.clone();
    for item in 0..clean.batch() {
        for c in 0..clean.channels() {
            let base = ((item * clean.channels() + c) * clean.height()) * clean.width();
            let hw = clean.height() * clean.width();
            let t_plane = transmission.plane(item, 0);
            let dst = &mut out.data_mut()[base..base + hw];
            for (v, &t) in dst.iter_mut().zip(t_plane.iter()) {
                let i = *v * t + b * (one - t);
                *v = clamp01(i);
            }
        }
    }
    Ok(out)
}

/// J = (I - B) / max(t, t_floor) + B, clipped to [0, 1].
pub fn invert_scattering<T: Real>(
    hazy: &Tensor<T>,
    transmission: &Tensor<T>,
    airlight: f64,
    t_floor: f64,
) -> Result<Tensor<T>> {
    check_broadcast(hazy, transmission, "invert_scattering")?;
    let b = T::from_f64(airlight);
    let floor = T::from_f64(t_floor);
    let mut out = hazy.clone();
    let hw = hazy.height() * hazy.width();
    for item in 0..hazy.batch() {
        for c in 0..hazy.channels() {
            let base = ((item * hazy.channels() + c) * hazy.height()) * hazy.width();
            let t_plane = transmission.plane(item, 0);
            let dst = &mut out.data_mut()[base..base + hw];
            for (v, &t) in dst.iter_mut().zip(t_plane.iter()) {
                let t = if t > floor { t } else { floor };
                let j = (*v - b) / t + b;
                *v = clamp01(j);
            }
        }
    }
    Ok(out)
}

#[inline]
fn clamp01<T: Real>(v: T) -> T {
    if v < T::zero() {
        T::zero()
    } else if v > T::one() {
        T::one()
    } else {
        v
    }
}

fn check_broadcast<T: Real>(
    image: &Tensor<T>,
    transmission: &Tensor<T>,
    context: &'static str,
) -> Result<()> {
    let (n, _, h, w) = image.shape();
    if transmission.shape() != (n, 1, h, w) {
        return Err(Error::ShapeMismatch {
            context,
            expected: crate::tensor::shape_str((n, 1, h, w)),
            got: crate::tensor::shape_str(transmission.shape()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_depth_is_full_transmission() {
        let d = Tensor::<f64>::zeros(1, 1, 2, 2);
        let t = transmission_from_depth(&d, 1.7).unwrap();
        assert!(t.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn transmission_matches_exponential_at_beta_range_endpoints() {
        let d = Tensor::<f64>::filled(1, 1, 1, 1, 1.0);
        let t = transmission_from_depth(&d, 0.6).unwrap();
        assert!((t.at(0, 0, 0, 0) - 0.548812).abs() < 1e-6);
        let t = transmission_from_depth(&d, 2.8).unwrap();
        assert!((t.at(0, 0, 0, 0) - 0.060810).abs() < 1e-6);
    }

    #[test]
    fn non_positive_beta_rejected() {
        let d = Tensor::<f64>::zeros(1, 1, 1, 1);
        assert!(transmission_from_depth(&d, 0.0).is_err());
        assert!(transmission_from_depth(&d, -2.0).is_err());
    }

    #[test]
    fn synthesis_limits() {
        let clean = Tensor::<f64>::filled(1, 3, 2, 2, 0.37);
        let t1 = Tensor::<f64>::filled(1, 1, 2, 2, 1.0);
        assert_eq!(synthesize_hazy(&clean, &t1, 0.9).unwrap(), clean);

        let t0 = Tensor::<f64>::zeros(1, 1, 2, 2);
        let out = synthesize_hazy(&clean, &t0, 0.9).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.9));
    }

    #[test]
    fn synthesis_hand_value() {
        let clean = Tensor::<f64>::filled(1, 3, 1, 1, 0.5);
        let t = Tensor::<f64>::filled(1, 1, 1, 1, 0.5);
        let out = synthesize_hazy(&clean, &t, 1.0).unwrap();
        assert!((out.at(0, 0, 0, 0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn inversion_hand_values() {
        let hazy = Tensor::<f64>::filled(1, 3, 1, 1, 0.75);
        let t = Tensor::<f64>::filled(1, 1, 1, 1, 0.5);
        let j = invert_scattering(&hazy, &t, 1.0, 0.1).unwrap();
        assert!((j.at(0, 0, 0, 0) - 0.5).abs() < 1e-12);

        // I = B everywhere stays B regardless of t.
        let hazy = Tensor::<f64>::filled(1, 3, 2, 2, 0.8);
        let t = Tensor::<f64>::filled(1, 1, 2, 2, 0.33);
        let j = invert_scattering(&hazy, &t, 0.8, 0.1).unwrap();
        assert!(j.data().iter().all(|&v| (v - 0.8).abs() < 1e-12));

        // The floor engages below t_floor.
        let hazy = Tensor::<f64>::filled(1, 3, 1, 1, 0.9);
        let t = Tensor::<f64>::filled(1, 1, 1, 1, 0.01);
        let j = invert_scattering(&hazy, &t, 1.0, 0.1).unwrap();
        assert!((j.at(0, 0, 0, 0) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn roundtrip_recovers_clean() {
        let clean =
            Tensor::<f64>::from_vec(1, 3, 1, 2, vec![0.1, 0.9, 0.4, 0.6, 0.0, 1.0]).unwrap();
        let t = Tensor::<f64>::from_vec(1, 1, 1, 2, vec![0.15, 0.8]).unwrap();
        let hazy = synthesize_hazy(&clean, &t, 0.85).unwrap();
        let back = invert_scattering(&hazy, &t, 0.85, 0.1).unwrap();
        for (a, b) in back.data().iter().zip(clean.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let clean = Tensor::<f64>::zeros(1, 3, 2, 2);
        let t = Tensor::<f64>::zeros(1, 1, 3, 2);
        assert!(synthesize_hazy(&clean, &t, 0.9).is_err());
    }
}
