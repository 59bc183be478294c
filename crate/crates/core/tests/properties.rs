//! Property tests for the algebraic invariants: conv linearity, concat
//! roundtrips, scattering inverses, SSIM identities, box-filter oracle
//! equivalence, and optimizer step bounds.

use proptest::prelude::*;

use dehaze_core::adam::{adam_step, AdamState};
use dehaze_core::guided::{box_filter, guided_filter, GuidedFilterParams};
use dehaze_core::losses::{ssim_map, SsimParams};
use dehaze_core::metrics::psnr;
use dehaze_core::ops::{concat_backward, concat_channels, conv2d_forward, ConvParams};
use dehaze_core::scattering::{invert_scattering, synthesize_hazy, transmission_from_depth};
use dehaze_core::Tensor;

fn tensor_strategy(
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    lo: f64,
    hi: f64,
) -> impl Strategy<Value = Tensor<f64>> {
    proptest::collection::vec(lo..hi, n * c * h * w)
        .prop_map(move |data| Tensor::from_vec(n, c, h, w, data).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conv_is_linear_in_the_input(
        x in tensor_strategy(1, 2, 6, 6, -1.0, 1.0),
        y in tensor_strategy(1, 2, 6, 6, -1.0, 1.0),
        kernel in tensor_strategy(3, 2, 3, 3, -1.0, 1.0),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let params = ConvParams::new(kernel, vec![0.0; 3]).unwrap();
        let combined = Tensor::from_vec(
            1, 2, 6, 6,
            x.data().iter().zip(y.data().iter()).map(|(xv, yv)| a * xv + b * yv).collect(),
        ).unwrap();
        let f_combined = conv2d_forward(&combined, &params).unwrap();
        let f_x = conv2d_forward(&x, &params).unwrap();
        let f_y = conv2d_forward(&y, &params).unwrap();
        for i in 0..f_combined.len() {
            let want = a * f_x.data()[i] + b * f_y.data()[i];
            prop_assert!((f_combined.data()[i] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn concat_then_split_is_identity(
        a in tensor_strategy(2, 3, 4, 5, -1.0, 1.0),
        b in tensor_strategy(2, 1, 4, 5, -1.0, 1.0),
        c in tensor_strategy(2, 4, 4, 5, -1.0, 1.0),
    ) {
        let merged = concat_channels(&[&a, &b, &c]).unwrap();
        let parts = concat_backward(&merged, &[3, 1, 4]).unwrap();
        prop_assert_eq!(&parts[0], &a);
        prop_assert_eq!(&parts[1], &b);
        prop_assert_eq!(&parts[2], &c);
    }

    #[test]
    fn scattering_roundtrip_recovers_clean(
        clean in tensor_strategy(1, 3, 4, 4, 0.0, 1.0),
        t in tensor_strategy(1, 1, 4, 4, 0.1, 1.0),
        airlight in 0.7..1.0f64,
    ) {
        let hazy = synthesize_hazy(&clean, &t, airlight).unwrap();
        let back = invert_scattering(&hazy, &t, airlight, 0.1).unwrap();
        for (got, want) in back.data().iter().zip(clean.data().iter()) {
            prop_assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn synthesis_is_a_convex_combination(
        clean in tensor_strategy(1, 3, 3, 3, 0.0, 1.0),
        t in tensor_strategy(1, 1, 3, 3, 0.0, 1.0),
        airlight in 0.0..1.0f64,
    ) {
        let hazy = synthesize_hazy(&clean, &t, airlight).unwrap();
        let hw = 9;
        for ch in 0..3 {
            for p in 0..hw {
                let j = clean.plane(0, ch)[p];
                let i = hazy.plane(0, ch)[p];
                prop_assert!(i >= j.min(airlight) - 1e-12 && i <= j.max(airlight) + 1e-12);
            }
        }
    }

    #[test]
    fn transmission_decreases_in_depth_and_beta(
        beta_lo in 0.6..1.6f64,
        bump in 0.05..1.2f64,
    ) {
        let depths = Tensor::from_vec(1, 1, 1, 5, vec![0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        let t_lo = transmission_from_depth(&depths, beta_lo).unwrap();
        let t_hi = transmission_from_depth(&depths, beta_lo + bump).unwrap();
        for i in 1..5 {
            prop_assert!(t_lo.data()[i] < t_lo.data()[i - 1]);
        }
        for i in 0..5 {
            prop_assert!(t_hi.data()[i] < t_lo.data()[i]);
        }
    }

    #[test]
    fn ssim_self_identity_and_symmetry(
        x in tensor_strategy(1, 1, 14, 15, 0.0, 1.0),
        y in tensor_strategy(1, 1, 14, 15, 0.0, 1.0),
    ) {
        let params = SsimParams::default();
        let self_map = ssim_map(&x, &x, &params).unwrap();
        for &v in self_map.data() {
            prop_assert!((v - 1.0).abs() < 1e-9);
        }
        let xy = ssim_map(&x, &y, &params).unwrap();
        let yx = ssim_map(&y, &x, &params).unwrap();
        for (a, b) in xy.data().iter().zip(yx.data().iter()) {
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(*a <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn box_filter_matches_naive_oracle(
        img in tensor_strategy(1, 1, 11, 13, -1.0, 1.0),
        radius in 1usize..8,
    ) {
        let fast = box_filter(&img, radius).unwrap();
        let (h, w) = (11usize, 13usize);
        for y in 0..h {
            for x in 0..w {
                let mut sum = 0.0;
                let mut count = 0.0;
                for yy in y.saturating_sub(radius)..(y + radius + 1).min(h) {
                    for xx in x.saturating_sub(radius)..(x + radius + 1).min(w) {
                        sum += img.at(0, 0, yy, xx);
                        count += 1.0;
                    }
                }
                prop_assert!((fast.at(0, 0, y, x) - sum / count).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn guided_filter_input_shift_equivariance(
        guide in tensor_strategy(1, 1, 10, 10, 0.0, 1.0),
        input in tensor_strategy(1, 1, 10, 10, 0.0, 1.0),
        shift in -0.5..0.5f64,
    ) {
        let params = GuidedFilterParams { radius: 2, eps: 1e-3 };
        let base = guided_filter(&guide, &input, &params).unwrap();
        let shifted = guided_filter(&guide, &input.map(|v| v + shift), &params).unwrap();
        for (s, b) in shifted.data().iter().zip(base.data().iter()) {
            prop_assert!((s - b - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn adam_first_step_is_bounded_by_lr(
        grads in proptest::collection::vec(-100.0..100.0f64, 16),
    ) {
        let mut state = AdamState::new(16, 0.001, 0.9, 0.999, 1e-8);
        let mut param = vec![0.0; 16];
        adam_step("p", &mut param, &grads, &mut state).unwrap();
        for v in &param {
            prop_assert!(v.abs() <= 0.001 * (1.0 + 1e-6));
        }
    }

    #[test]
    fn psnr_monotone_in_mse(a in 1.0..60000.0f64, b in 1.0..60000.0f64) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(psnr(lo).unwrap() > psnr(hi).unwrap());
    }
}
