#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::time::Instant;

use dehaze_core::guided::{refine_transmission, GuidedFilterParams};
use dehaze_core::metrics::{airlight_accuracy, ssim_eval};
use dehaze_core::network::{
    estimate_scalar_airlight, forward_cascade, train, NetworkConfig, TrainHyper,
};
use dehaze_core::scattering::invert_scattering;
use dehaze_core::seed::subseed;
use dehaze_core::synth::{expand_image, procedural_scene, HazeSample, SampleRanges};

fn build_set(count: usize, per_image: usize, tag: &str, seed: u64) -> Vec<HazeSample<f32>> {
    let mut out = Vec::new();
    let ranges = SampleRanges::default();
    for i in 0..count {
        let id = format!("{tag}_{i:03}");
        let (clean, depth) = procedural_scene::<f32>(48, 64, subseed(seed, &id, 0));
        let mut samples = expand_image(&id, &clean, &depth, per_image, &ranges, seed, 48, 64).unwrap();
        out.append(&mut samples);
    }
    out
}

fn main() {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let train_set = build_set(20, 5, "train", 1);
    let val_set = build_set(4, 5, "val", 2);
    println!("train {} samples, val {}", train_set.len(), val_set.len());
    let config = NetworkConfig::default();
    let hyper = TrainHyper { epochs, seed: 1, ..TrainHyper::default() };
    let t0 = Instant::now();
    let (store, report) = train(&train_set, &val_set, &config, &hyper).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "initial val: total {:.5} (ssim {:.5} mse {:.5})",
        report.initial_val.total, report.initial_val.ssim, report.initial_val.mse
    );
    for e in &report.epochs {
        if e.epoch % 20 == 0 || e.epoch == epochs {
            println!(
                "epoch {:3}: train {:.5} val total {:.5} (ssim {:.5} mse {:.5})",
                e.epoch, e.train_total, e.val.total, e.val.ssim, e.val.mse
            );
        }
    }
    let final_val = report.epochs.last().unwrap().val;
    println!(
        "criterion6: final {:.5} vs 0.2*initial {:.5} => {}",
        final_val.total,
        0.2 * report.initial_val.total,
        final_val.total <= 0.2 * report.initial_val.total
    );
    println!("criterion6 mse: {:.5} <= 0.05 => {}", final_val.mse, final_val.mse <= 0.05);

    // criterion 7: airlight accuracy on the validation set
    let mut pred_b = Vec::new();
    let mut gt_b = Vec::new();
    for s in &val_set {
        let out = forward_cascade(&s.hazy, &store, &config).unwrap();
        pred_b.push(estimate_scalar_airlight(&out.airlight));
        gt_b.push(s.airlight);
    }
    let acc = airlight_accuracy(&pred_b, &gt_b, 0.05).unwrap();
    println!("criterion7: airlight accuracy {:.3} >= 0.75 => {}", acc, acc >= 0.75);
    for (p, g) in pred_b.iter().zip(gt_b.iter()).take(6) {
        println!("  pred {:.4} gt {:.4} err {:.4}", p, g, (p - g).abs());
    }

    // criterion 8: refined vs unrefined mean SSIM of dehazed outputs
    let gf = GuidedFilterParams::default();
    let mut ssim_refined = 0.0;
    let mut ssim_coarse = 0.0;
    for s in &val_set {
        let out = forward_cascade(&s.hazy, &store, &config).unwrap();
        let b = estimate_scalar_airlight(&out.airlight);
        let coarse_t = out.transmission.clamp(0.0, 1.0);
        let refined_t = refine_transmission(&s.hazy, &out.transmission, &gf).unwrap();
        let j_coarse = invert_scattering(&s.hazy, &coarse_t, b, 0.1).unwrap();
        let j_refined = invert_scattering(&s.hazy, &refined_t, b, 0.1).unwrap();
        ssim_coarse += ssim_eval(&j_coarse, &s.clean).unwrap();
        ssim_refined += ssim_eval(&j_refined, &s.clean).unwrap();
    }
    ssim_coarse /= val_set.len() as f64;
    ssim_refined /= val_set.len() as f64;
    println!(
        "criterion8: refined ssim {:.4} vs unrefined {:.4} => {}",
        ssim_refined, ssim_coarse, ssim_refined >= ssim_coarse
    );
    println!("elapsed {:.1} min", dt / 60.0);
}
