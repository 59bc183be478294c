use std::time::Instant;

use dehaze_core::losses::{mse_loss, ssim_loss, SsimParams};
use dehaze_core::network::{init_weights, loss_and_gradients, forward_cascade, NetworkConfig};
use dehaze_core::ops::{conv2d_backward, conv2d_forward, ConvParams};
use dehaze_core::Tensor;

fn main() {
    let (h, w) = (48usize, 64usize);
    let input16 = Tensor::<f32>::filled(1, 16, h, w, 0.4);
    let kernel = Tensor::<f32>::filled(16, 16, 3, 3, 0.01);
    let params = ConvParams::new(kernel, vec![0.0; 16]).unwrap();

    let reps = 2000;
    let t = Instant::now();
    let mut sink = 0.0f32;
    for _ in 0..reps {
        let out = conv2d_forward(&input16, &params).unwrap();
        sink += out.data()[0];
    }
    let fwd = t.elapsed().as_secs_f64() / reps as f64;
    println!("conv fwd 16->16 @48x64: {:.3} ms ({:.1} GFLOP/s) [{sink}]", fwd * 1e3, 2.0 * 7.08e6 / fwd / 1e9);

    let grad = Tensor::<f32>::filled(1, 16, h, w, 0.1);
    let t = Instant::now();
    let reps2 = 1000;
    for _ in 0..reps2 {
        let (gi, _, _) = conv2d_backward(&input16, &params, &grad).unwrap();
        sink += gi.data()[0];
    }
    let bwd = t.elapsed().as_secs_f64() / reps2 as f64;
    println!("conv bwd 16->16 @48x64: {:.3} ms ({:.1} GFLOP/s) [{sink}]", bwd * 1e3, 2.0 * 14.16e6 / bwd / 1e9);

    let pred = Tensor::<f32>::filled(1, 1, h, w, 0.4);
    let target = Tensor::<f32>::filled(1, 1, h, w, 0.8);
    let t = Instant::now();
    for _ in 0..reps2 {
        let (l, g) = ssim_loss(&pred, &target, &SsimParams::default()).unwrap();
        sink += (l as f32) + g.data()[0];
    }
    println!("ssim_loss+grad @48x64: {:.3} ms [{sink}]", t.elapsed().as_secs_f64() / reps2 as f64 * 1e3);

    let t = Instant::now();
    for _ in 0..reps2 {
        let (l, g) = mse_loss(&pred, &target).unwrap();
        sink += (l as f32) + g.data()[0];
    }
    println!("mse_loss @48x64: {:.3} ms [{sink}]", t.elapsed().as_secs_f64() / reps2 as f64 * 1e3);

    // whole-network forward + forward/backward
    let config = NetworkConfig::default();
    let store = init_weights::<f32>(&config, 1).unwrap();
    let rgb = Tensor::<f32>::filled(1, 3, h, w, 0.4);
    let t = Instant::now();
    let reps3 = 200;
    for _ in 0..reps3 {
        let out = forward_cascade(&rgb, &store, &config).unwrap();
        sink += out.transmission.data()[0];
    }
    println!("cascade fwd: {:.2} ms [{sink}]", t.elapsed().as_secs_f64() / reps3 as f64 * 1e3);

    let t_map = Tensor::<f32>::filled(1, 1, h, w, 0.5);
    let b_map = Tensor::<f32>::filled(1, 1, h, w, 0.85);
    let t = Instant::now();
    for _ in 0..reps3 {
        let (_, _, g) = loss_and_gradients(&rgb, &t_map, &b_map, &store, &config, &SsimParams::default()).unwrap();
        sink += g.grads[0].1[0];
    }
    println!("cascade fwd+loss+bwd: {:.2} ms [{sink}]", t.elapsed().as_secs_f64() / reps3 as f64 * 1e3);
}
