//! Register-blocked matrix kernel backing the convolution layers.
//!
//! One shape covers every use: `gemm_nn` (C += A*B) drives the forward
//! pass, the input gradient (via the adjoint kernel), and the kernel
//! gradient (via a transposed patch matrix). A and C take explicit row
//! strides so row bands of larger tensors can be addressed in place.
//! Accumulation runs in independent lanes so the compiler can vectorize
//! without reassociating a single serial sum; results are identical run
//! to run.

use crate::tensor::Real;

// Tile widths tuned for one f32/f64 accumulator set living in vector
// registers. f32 gets the wider tile.
const MR: usize = 4;

#[inline(always)]
fn f32_tiles<T: Real>() -> bool {
    core::mem::size_of::<T>() == 4
}

/// C[i*ldc + j] += sum_p A[i*lda + p] * B[p*n + j] for an (m x k x n)
/// product; B is packed row-major with stride n.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_nn<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    lda: usize,
    b: &[T],
    c: &mut [T],
    ldc: usize,
) {
    debug_assert!(lda >= k && a.len() >= (m - 1) * lda + k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert!(ldc >= n && c.len() >= (m - 1) * ldc + n);
    if f32_tiles::<T>() {
        gemm_nn_blocked::<T, 48>(m, k, n, a, lda, b, c, ldc);
    } else {
        gemm_nn_blocked::<T, 24>(m, k, n, a, lda, b, c, ldc);
    }
}

#[allow(clippy::too_many_arguments)]
fn gemm_nn_blocked<T: Real, const NR: usize>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    lda: usize,
    b: &[T],
    c: &mut [T],
    ldc: usize,
) {
    // Column tiles outermost so one B tile serves every row block.
    let mut j = 0;
    while j + NR <= n {
        let mut i = 0;
        while i + MR <= m {
            let mut acc = [[T::zero(); NR]; MR];
            for p in 0..k {
                let bp = &b[p * n + j..p * n + j + NR];
                for (ii, acc_row) in acc.iter_mut().enumerate() {
                    let av = a[(i + ii) * lda + p];
                    for (jj, slot) in acc_row.iter_mut().enumerate() {
                        *slot = *slot + av * bp[jj];
                    }
                }
            }
            for (ii, acc_row) in acc.iter().enumerate() {
                let crow = &mut c[(i + ii) * ldc + j..(i + ii) * ldc + j + NR];
                for (jj, slot) in acc_row.iter().enumerate() {
                    crow[jj] = crow[jj] + *slot;
                }
            }
            i += MR;
        }
        // Remaining rows, one at a time with a full-width accumulator.
        while i < m {
            let mut acc = [T::zero(); NR];
            for p in 0..k {
                let av = a[i * lda + p];
                let bp = &b[p * n + j..p * n + j + NR];
                for (jj, slot) in acc.iter_mut().enumerate() {
                    *slot = *slot + av * bp[jj];
                }
            }
            let crow = &mut c[i * ldc + j..i * ldc + j + NR];
            for (jj, slot) in acc.iter().enumerate() {
                crow[jj] = crow[jj] + *slot;
            }
            i += 1;
        }
        j += NR;
    }
    if j < n {
        gemm_nn_edge(0, m, j, m, k, n, a, lda, c, ldc, b);
    }
}

/// Scalar fallback for the right-edge columns [j0, n) of rows [i0, i0+rows).
#[allow(clippy::too_many_arguments)]
fn gemm_nn_edge<T: Real>(
    i0: usize,
    rows: usize,
    j0: usize,
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    lda: usize,
    c: &mut [T],
    ldc: usize,
    b: &[T],
) {
    for i in i0..(i0 + rows).min(m) {
        for j in j0..n {
            let mut s = T::zero();
            for p in 0..k {
                s = s + a[i * lda + p] * b[p * n + j];
            }
            c[i * ldc + j] = c[i * ldc + j] + s;
        }
    }
}
