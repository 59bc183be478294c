//! On-demand verification suite: finite-difference gradient checks,
//! scattering roundtrips, box-filter and guided-filter oracles, SSIM
//! closed forms, optimizer bounds, and the weight-codec corruption paths.
//! The seed varies the randomized inputs, never the expected outcomes.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dehaze_core::adam::{adam_step, AdamState};
use dehaze_core::guided::{box_filter, guided_filter, GuidedFilterParams};
use dehaze_core::losses::{mse_loss, ssim_loss, ssim_map, SsimParams};
use dehaze_core::metrics::psnr;
use dehaze_core::network::{init_weights, loss_and_gradients, NetworkConfig, WeightStore};
use dehaze_core::ops::{conv2d_backward, conv2d_forward, conv2d_reference, ConvParams};
use dehaze_core::scattering::{invert_scattering, synthesize_hazy};
use dehaze_core::Tensor;

use crate::weights::{decode_weights, encode_weights, WeightsError};

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-8 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, n: usize, c: usize, h: usize, w: usize, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_vec(n, c, h, w, (0..n * c * h * w).map(|_| rng.gen_range(lo..hi)).collect())
        .unwrap()
}

pub fn run_all(seed: u64, perturb_gradient: bool) -> Vec<CheckResult> {
    vec![
        conv_oracle(seed),
        conv_gradient_fd(seed, perturb_gradient),
        scattering_roundtrip(seed),
        box_filter_oracle(seed),
        box_filter_radius_timing(),
        guided_affine(seed),
        ssim_closed_forms(seed),
        loss_gradient_fd(seed),
        adam_first_step(),
        psnr_arithmetic(),
        weight_codec(seed),
        end_to_end_gradient(seed),
    ]
}

/// Lowered convolution vs the naive reference loop.
fn conv_oracle(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut worst = 0.0f64;
    for &(c, o, f, h, w) in &[(2usize, 3usize, 3usize, 6usize, 7usize), (3, 2, 5, 8, 9), (1, 4, 3, 16, 40)] {
        let input = random_tensor(&mut rng, 1, c, h, w, -1.0, 1.0);
        let kernel = random_tensor(&mut rng, o, c, f, f, -1.0, 1.0);
        let bias = (0..o).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let params = ConvParams::new(kernel, bias).unwrap();
        let fast = conv2d_forward(&input, &params).unwrap();
        let slow = conv2d_reference(&input, &params).unwrap();
        for (a, b) in fast.data().iter().zip(slow.data().iter()) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    check(
        "conv lowering vs naive reference",
        worst < 1e-6,
        format!("max rel err {worst:.2e} (tol 1e-6)"),
    )
}

/// Per-layer conv gradients vs central finite differences.
fn conv_gradient_fd(seed: u64, perturb: bool) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let input = random_tensor(&mut rng, 1, 2, 5, 5, -1.0, 1.0);
    let kernel = random_tensor(&mut rng, 4, 2, 3, 3, -1.0, 1.0);
    let bias = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let params = ConvParams::new(kernel, bias).unwrap();
    let grad_out = random_tensor(&mut rng, 1, 4, 5, 5, -1.0, 1.0);

    let objective = |input: &Tensor<f64>, params: &ConvParams<f64>| -> f64 {
        conv2d_forward(input, params)
            .unwrap()
            .data()
            .iter()
            .zip(grad_out.data().iter())
            .map(|(o, g)| o * g)
            .sum()
    };
    let (gi, gk, _gb) = conv2d_backward(&input, &params, &grad_out).unwrap();
    let mut analytic_input_grad: Vec<f64> = gi.data().to_vec();
    if perturb {
        // Negative-control hook: break one analytic value on purpose.
        analytic_input_grad[3] += 1e-2;
    }

    let h = 1e-5;
    let mut worst = 0.0f64;
    for idx in 0..input.len() {
        let mut probe = input.clone();
        probe.data_mut()[idx] += h;
        let up = objective(&probe, &params);
        probe.data_mut()[idx] -= 2.0 * h;
        let down = objective(&probe, &params);
        worst = worst.max(rel_err(analytic_input_grad[idx], (up - down) / (2.0 * h)));
    }
    for idx in 0..params.kernel().len() {
        let mut probe = params.clone();
        probe.kernel_mut().data_mut()[idx] += h;
        let up = objective(&input, &probe);
        probe.kernel_mut().data_mut()[idx] -= 2.0 * h;
        let down = objective(&input, &probe);
        worst = worst.max(rel_err(gk.data()[idx], (up - down) / (2.0 * h)));
    }
    check(
        "conv gradients vs finite differences",
        worst < 1e-4,
        format!("max rel err {worst:.2e} (tol 1e-4)"),
    )
}

fn scattering_roundtrip(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let clean = random_tensor(&mut rng, 1, 3, 4, 5, 0.0, 1.0);
        let t = random_tensor(&mut rng, 1, 1, 4, 5, 0.1, 1.0);
        let b = rng.gen_range(0.7..1.0);
        let hazy = synthesize_hazy(&clean, &t, b).unwrap();
        let back = invert_scattering(&hazy, &t, b, 0.1).unwrap();
        for (a, want) in back.data().iter().zip(clean.data().iter()) {
            worst = worst.max((a - want).abs());
        }
    }
    check(
        "scattering synthesize/invert roundtrip",
        worst < 1e-6,
        format!("max abs err {worst:.2e} (tol 1e-6)"),
    )
}

fn box_filter_oracle(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(4));
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let h = rng.gen_range(4..40);
        let w = rng.gen_range(4..40);
        let radius = rng.gen_range(1..12);
        let img = random_tensor(&mut rng, 1, 1, h, w, -1.0, 1.0);
        let fast = box_filter(&img, radius).unwrap();
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
                worst = worst.max((fast.at(0, 0, y, x) - sum / count).abs());
            }
        }
    }
    check(
        "box filter vs naive sliding window",
        worst < 1e-10,
        format!("max abs err {worst:.2e} (tol 1e-10)"),
    )
}

/// Summed-area-table box filtering must not scale with the radius.
fn box_filter_radius_timing() -> CheckResult {
    let img = Tensor::<f64>::from_vec(
        1,
        1,
        512,
        512,
        (0..512 * 512).map(|i| (i % 101) as f64 / 101.0).collect(),
    )
    .unwrap();
    let time_r = |r: usize| -> f64 {
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let t = Instant::now();
            let out = box_filter(&img, r).unwrap();
            std::hint::black_box(out.at(0, 0, 7, 7));
            best = best.min(t.elapsed().as_secs_f64());
        }
        best
    };
    let small = time_r(2);
    let large = time_r(16);
    let ratio = large / small;
    check(
        "box filter runtime independent of radius",
        ratio < 1.5,
        format!("512x512 r=16 vs r=2 time ratio {ratio:.2} (tol < 1.5)"),
    )
}

fn guided_affine(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(5));
    let guide = random_tensor(&mut rng, 1, 1, 20, 24, 0.0, 1.0);
    let input = guide.map(|v| 2.0 * v + 0.1);
    let out = guided_filter(&guide, &input, &GuidedFilterParams { radius: 3, eps: 0.0 }).unwrap();
    let mut worst = 0.0f64;
    for (o, i) in out.data().iter().zip(input.data().iter()) {
        worst = worst.max((o - i).abs());
    }
    check(
        "guided filter reproduces affine input at eps=0",
        worst < 1e-8,
        format!("max abs err {worst:.2e} (tol 1e-8)"),
    )
}

fn ssim_closed_forms(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(6));
    let params = SsimParams::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = rng.gen_range(0.0..1.0);
        let b = rng.gen_range(0.0..1.0);
        let pred = Tensor::<f64>::filled(1, 1, 16, 16, a);
        let target = Tensor::<f64>::filled(1, 1, 16, 16, b);
        let map = ssim_map(&pred, &target, &params).unwrap();
        let closed = (2.0 * a * b + params.c1) / (a * a + b * b + params.c1);
        for &v in map.data() {
            worst = worst.max((v - closed).abs());
        }
    }
    let x = random_tensor(&mut rng, 1, 1, 16, 16, 0.0, 1.0);
    let self_map = ssim_map(&x, &x, &params).unwrap();
    for &v in self_map.data() {
        worst = worst.max((v - 1.0).abs());
    }
    check(
        "ssim constant-patch closed form and self-identity",
        worst < 1e-12,
        format!("max abs err {worst:.2e} (tol 1e-12)"),
    )
}

fn loss_gradient_fd(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7));
    let mut pred = random_tensor(&mut rng, 1, 1, 16, 16, 0.1, 0.9);
    let target = random_tensor(&mut rng, 1, 1, 16, 16, 0.1, 0.9);
    let params = SsimParams::default();
    let (_, sgrad) = ssim_loss(&pred, &target, &params).unwrap();
    let (_, mgrad) = mse_loss(&pred, &target).unwrap();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for idx in (0..pred.len()).step_by(11) {
        let x0 = pred.data()[idx];
        pred.data_mut()[idx] = x0 + h;
        let (up_s, _) = ssim_loss(&pred, &target, &params).unwrap();
        let (up_m, _) = mse_loss(&pred, &target).unwrap();
        pred.data_mut()[idx] = x0 - h;
        let (dn_s, _) = ssim_loss(&pred, &target, &params).unwrap();
        let (dn_m, _) = mse_loss(&pred, &target).unwrap();
        pred.data_mut()[idx] = x0;
        worst = worst.max(rel_err(sgrad.data()[idx], (up_s - dn_s) / (2.0 * h)));
        worst = worst.max(rel_err(mgrad.data()[idx], (up_m - dn_m) / (2.0 * h)));
    }
    check(
        "loss gradients vs finite differences",
        worst < 1e-3,
        format!("max rel err {worst:.2e} (tol 1e-3)"),
    )
}

fn adam_first_step() -> CheckResult {
    let mut p = vec![0.0f64];
    let mut s = AdamState::new(1, 0.001, 0.9, 0.999, 1e-8);
    adam_step("w", &mut p, &[0.5], &mut s).unwrap();
    let expected = -0.001 * 0.5 / (0.25f64.sqrt() + 1e-8);
    let ok1 = (p[0] - expected).abs() < 1e-15;

    let mut p2 = vec![1.0f64; 8];
    let mut s2 = AdamState::new(8, 0.001, 0.9, 0.999, 1e-8);
    let g = [40.0, -3.0, 0.2, -0.001, 7.7, -88.0, 0.6, 2.0];
    adam_step("w", &mut p2, &g, &mut s2).unwrap();
    let ok2 = p2.iter().all(|v| (v - 1.0).abs() <= 0.001 * (1.0 + 1e-6));
    check(
        "adam first-step value and magnitude bound",
        ok1 && ok2,
        format!("t=1 update {:.10} (expected {expected:.10})", p[0]),
    )
}

fn psnr_arithmetic() -> CheckResult {
    let db = psnr(958.1711).unwrap();
    let ok = (db - 18.3165).abs() < 5e-4 && (db - 18.3298).abs() < 0.05 && psnr(0.0).unwrap().is_infinite();
    check(
        "psnr arithmetic reference points",
        ok,
        format!("psnr(958.1711) = {db:.4} dB"),
    )
}

fn weight_codec(seed: u64) -> CheckResult {
    let config = NetworkConfig::default();
    let store: WeightStore<f32> = init_weights(&config, seed).unwrap();
    let bytes = encode_weights(&store);
    let roundtrip = matches!(decode_weights(&bytes, &config), Ok(ref s) if *s == store);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    let magic = matches!(decode_weights(&bad, &config), Err(WeightsError::BadMagic));
    let truncated = matches!(
        decode_weights(&bytes[..bytes.len() - 3], &config),
        Err(WeightsError::Truncated { .. })
    );
    check(
        "weight file roundtrip and corruption paths",
        roundtrip && magic && truncated,
        format!("{} bytes, roundtrip exact", bytes.len()),
    )
}

fn end_to_end_gradient(seed: u64) -> CheckResult {
    let started = Instant::now();
    let config = NetworkConfig {
        trunk_depth: 2,
        trunk_filters: 4,
        kernel_size: 3,
        airlight_depth: 2,
        airlight_filters: 4,
        trans_block_size: 2,
        concat_blocks: 2,
        init_std: 0.05,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(8));
    let input = random_tensor(&mut rng, 1, 3, 8, 8, 0.05, 0.95);
    let t_target = random_tensor(&mut rng, 1, 1, 8, 8, 0.1, 1.0);
    let b_target = Tensor::filled(1, 1, 8, 8, 0.82);
    let mut store = init_weights::<f64>(&config, seed.wrapping_add(9)).unwrap();
    for idx in 0..store.len() {
        for b in store.params_mut(idx).bias_mut() {
            *b = 0.15;
        }
    }
    let ssim_params = SsimParams::default();
    let objective = |store: &WeightStore<f64>| {
        let (s, m, _) =
            loss_and_gradients(&input, &t_target, &b_target, store, &config, &ssim_params).unwrap();
        s + m
    };
    let (_, _, grads) =
        loss_and_gradients(&input, &t_target, &b_target, &store, &config, &ssim_params).unwrap();
    let mut worst = 0.0f64;
    // Sample a spread of parameters in every layer; the test suites probe
    // every parameter exhaustively.
    for idx in 0..store.len() {
        let len = store.params(idx).kernel().len();
        for e in (0..len).step_by(7) {
            let x0 = store.params(idx).kernel().data()[e];
            for step in [1e-5, 1e-7] {
                store.params_mut(idx).kernel_mut().data_mut()[e] = x0 + step;
                let up = objective(&store);
                store.params_mut(idx).kernel_mut().data_mut()[e] = x0 - step;
                let down = objective(&store);
                store.params_mut(idx).kernel_mut().data_mut()[e] = x0;
                let err = rel_err(grads.grads[idx].0.data()[e], (up - down) / (2.0 * step));
                if step > 1e-6 && err < 1e-3 {
                    worst = worst.max(err);
                    break;
                }
                if step < 1e-6 {
                    worst = worst.max(err);
                }
            }
        }
    }
    check(
        "network end-to-end gradient vs finite differences",
        worst < 1e-3,
        format!("max rel err {worst:.2e} in {:.1}s (tol 1e-3)", started.elapsed().as_secs_f64()),
    )
}
