use std::time::Instant;
use dehaze_core::ops::{conv2d_backward_with, conv2d_forward_with, ConvParams, ConvScratch};
use dehaze_core::Tensor;

fn bench_shape(cin: usize, cout: usize, h: usize, w: usize, scratch: &mut ConvScratch<f32>) {
    let input = Tensor::<f32>::filled(1, cin, h, w, 0.4);
    let kernel = Tensor::<f32>::filled(cout, cin, 3, 3, 0.01);
    let params = ConvParams::new(kernel, vec![0.0; cout]).unwrap();
    let grad = Tensor::<f32>::filled(1, cout, h, w, 0.1);
    let mut sink = 0.0f32;
    for _ in 0..20 {
        sink += conv2d_backward_with(&input, &params, &grad, scratch).unwrap().1.data()[0];
    }
    let reps = 500;
    let t = Instant::now();
    for _ in 0..reps {
        sink += conv2d_forward_with(&input, &params, scratch).unwrap().data()[0];
    }
    let fwd = t.elapsed().as_secs_f64() / reps as f64;
    let t = Instant::now();
    for _ in 0..reps {
        let (gi, gk, gb) = conv2d_backward_with(&input, &params, &grad, scratch).unwrap();
        sink += gi.data()[0] + gk.data()[0] + gb[0];
    }
    let bwd = t.elapsed().as_secs_f64() / reps as f64;
    let macs = (h * w * cout * cin * 9) as f64;
    println!(
        "conv {cin}->{cout} @{h}x{w}: fwd {:.3} ms ({:.1} GF/s)  bwd {:.3} ms ({:.1} GF/s) [{sink}]",
        fwd * 1e3, 2.0 * macs / fwd / 1e9, bwd * 1e3, 4.0 * macs / bwd / 1e9
    );
}

fn main() {
    let mut scratch = ConvScratch::new();
    bench_shape(16, 16, 48, 64, &mut scratch);
    bench_shape(48, 16, 48, 64, &mut scratch);
    bench_shape(3, 16, 48, 64, &mut scratch);
    bench_shape(16, 8, 48, 64, &mut scratch);
    bench_shape(8, 1, 48, 64, &mut scratch);
    bench_shape(48, 1, 48, 64, &mut scratch);
}
