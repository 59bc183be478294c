use std::time::Instant;
use dehaze_core::ops::{conv2d_backward, conv2d_forward, ConvParams};
use dehaze_core::Tensor;

fn main() {
    let (h, w) = (48usize, 64usize);
    let input16 = Tensor::<f32>::filled(1, 16, h, w, 0.4);
    let kernel = Tensor::<f32>::filled(16, 16, 3, 3, 0.01);
    let params = ConvParams::new(kernel, vec![0.0; 16]).unwrap();
    let grad = Tensor::<f32>::filled(1, 16, h, w, 0.1);

    let reps = 2000;
    let mut sink = 0.0f32;

    // warm
    for _ in 0..50 {
        sink += conv2d_backward(&input16, &params, &grad).unwrap().1.data()[0];
    }
    let t = Instant::now();
    for _ in 0..reps {
        let (gi, gk, gb) = conv2d_backward(&input16, &params, &grad).unwrap();
        sink += gi.data()[0] + gk.data()[0] + gb[0];
    }
    println!("conv bwd total: {:.3} ms [{sink}]", t.elapsed().as_secs_f64() / reps as f64 * 1e3);

    // adjoint conv fwd alone: build a 16->16 params and forward grad
    let t = Instant::now();
    for _ in 0..reps {
        sink += conv2d_forward(&grad, &params).unwrap().data()[0];
    }
    println!("fwd(grad) proxy: {:.3} ms [{sink}]", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
}
