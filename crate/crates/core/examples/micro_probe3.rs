// Phase-level replica of conv2d_backward to find where time goes.
use std::time::Instant;
use dehaze_core::ops::{conv2d_forward, ConvParams};
use dehaze_core::Tensor;

fn main() {
    let (h, w) = (48usize, 64usize);
    let hw = h * w;
    let (cin, cout, f) = (16usize, 16usize, 3usize);
    let k = cin * f * f;
    let input = Tensor::<f32>::filled(1, cin, h, w, 0.4);
    let kernel = Tensor::<f32>::filled(cout, cin, 3, 3, 0.01);
    let params = ConvParams::new(kernel, vec![0.0; cout]).unwrap();
    let grad = Tensor::<f32>::filled(1, cout, h, w, 0.1);

    let reps = 2000;
    let mut sink = 0.0f32;

    // phase 1: adjoint build + forward
    let t = Instant::now();
    for _ in 0..reps {
        // adjoint_params is private; emulate cost with a fresh ConvParams build
        let mut flip = Tensor::<f32>::zeros(cin, cout, f, f);
        for o in 0..cout { for ci in 0..cin { for ky in 0..f { for kx in 0..f {
            *flip.at_mut(ci, o, f-1-ky, f-1-kx) = params.kernel().at(o, ci, ky, kx);
        }}}}
        let p2 = ConvParams::new(flip, vec![0.0f32; cin]).unwrap();
        sink += conv2d_forward(&grad, &p2).unwrap().data()[0];
    }
    println!("adjoint+fwd: {:.3} ms [{sink}]", t.elapsed().as_secs_f64() / reps as f64 * 1e3);

    // phase 2: im2col (private; emulate with same access pattern)
    let mut patches = vec![0.0f32; k * hw];
    let pad = 1usize;
    let t = Instant::now();
    for _ in 0..reps {
        for ci in 0..cin {
            for ky in 0..f {
                for kx in 0..f {
                    let q = (ci * f + ky) * f + kx;
                    let dst_all = &mut patches[q * hw..(q + 1) * hw];
                    let x0 = pad.saturating_sub(kx);
                    let x1 = (w + pad - kx).min(w);
                    for y in 0..h {
                        let dst = &mut dst_all[y * w..(y + 1) * w];
                        let iy = y + ky;
                        if iy < pad || iy - pad >= h {
                            dst.iter_mut().for_each(|v| *v = 0.0);
                            continue;
                        }
                        let src = input.row(0, ci, iy - pad);
                        dst[..x0].iter_mut().for_each(|v| *v = 0.0);
                        dst[x1..].iter_mut().for_each(|v| *v = 0.0);
                        if x0 < x1 {
                            dst[x0..x1].copy_from_slice(&src[x0 + kx - pad..x1 + kx - pad]);
                        }
                    }
                }
            }
        }
        sink += patches[100];
    }
    println!("im2col: {:.3} ms [{sink}]", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
}
