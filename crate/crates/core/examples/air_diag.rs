// Diagnostic: does the airlight head ever leave the constant-prediction
// optimum, and how does accuracy evolve with steps?
#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

use dehaze_core::metrics::airlight_accuracy;
use dehaze_core::network::{estimate_scalar_airlight, forward_cascade, train, NetworkConfig, TrainHyper};
use dehaze_core::seed::subseed;
use dehaze_core::synth::{expand_image, procedural_scene, HazeSample, SampleRanges};

fn build_set(count: usize, per_image: usize, tag: &str, seed: u64) -> Vec<HazeSample<f32>> {
    let mut out = Vec::new();
    let ranges = SampleRanges::default();
    for i in 0..count {
        let id = format!("{tag}_{i:03}");
        let (clean, depth) = procedural_scene::<f32>(48, 64, subseed(seed, &id, 0));
        out.append(&mut expand_image(&id, &clean, &depth, per_image, &ranges, seed, 48, 64).unwrap());
    }
    out
}

fn main() {
    let stage_epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(150);
    let stages: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(4);
    let train_set = build_set(20, 5, "train", 1);
    let val_set = build_set(4, 5, "val", 2);
    let config = NetworkConfig::default();

    // Simulate longer training by chaining stages (fresh train() each time
    // would reinit; instead run a single long train via epochs arg).
    let total = stage_epochs * stages;
    let hyper = TrainHyper { epochs: total, seed: 1, ..TrainHyper::default() };
    let (store, report) = train(&train_set, &val_set, &config, &hyper).unwrap();
    for e in report.epochs.iter().filter(|e| e.epoch % stage_epochs == 0) {
        println!("epoch {:4}: val total {:.5} ssim {:.5} mse {:.5}", e.epoch, e.val.total, e.val.ssim, e.val.mse);
    }
    let mut pred = Vec::new();
    let mut gt = Vec::new();
    for s in &val_set {
        let out = forward_cascade(&s.hazy, &store, &config).unwrap();
        pred.push(estimate_scalar_airlight(&out.airlight));
        gt.push(s.airlight);
    }
    let acc = airlight_accuracy(&pred, &gt, 0.05).unwrap();
    let pred_mean = pred.iter().sum::<f64>() / pred.len() as f64;
    let pred_std = (pred.iter().map(|p| (p - pred_mean).powi(2)).sum::<f64>() / pred.len() as f64).sqrt();
    // correlation
    let gt_mean = gt.iter().sum::<f64>() / gt.len() as f64;
    let cov: f64 = pred.iter().zip(&gt).map(|(p, g)| (p - pred_mean) * (g - gt_mean)).sum::<f64>() / pred.len() as f64;
    let gt_std = (gt.iter().map(|g| (g - gt_mean).powi(2)).sum::<f64>() / gt.len() as f64).sqrt();
    println!("after {total} epochs: acc {acc:.3}, pred std {pred_std:.4}, corr {:.3}", cov / (pred_std * gt_std + 1e-12));
    for (p, g) in pred.iter().zip(gt.iter()).take(10) {
        println!("  pred {:.4} gt {:.4}", p, g);
    }
}
