use std::fmt::{Debug, Display};

use num_traits::Float;

/// Floating-point element type usable on a [`Tape`](crate::Tape).
///
/// Implemented for `f32` (training) and `f64` (gradient checks).
pub trait Real: Float + Debug + Display + Default + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `c = alpha * op(a) * op(b) + beta * c` with row-major operands.
    ///
    /// `op(a)` is `m x k`, `op(b)` is `k x n`; the transpose flags describe
    /// how the stored buffers relate to those logical shapes.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        trans_a: bool,
        trans_b: bool,
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        b: &[Self],
        beta: Self,
        c: &mut [Self],
    );
}

fn strides(trans: bool, rows: usize, cols: usize) -> (isize, isize) {
    // logical (rows x cols); stored either as rows x cols or cols x rows
    if trans {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

macro_rules! impl_real {
    ($t:ty, $kernel:path) => {
        impl Real for $t {
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            fn gemm(
                trans_a: bool,
                trans_b: bool,
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                b: &[Self],
                beta: Self,
                c: &mut [Self],
            ) {
                assert_eq!(a.len(), m * k, "gemm: lhs buffer");
                assert_eq!(b.len(), k * n, "gemm: rhs buffer");
                assert_eq!(c.len(), m * n, "gemm: output buffer");
                if m == 0 || n == 0 {
                    return;
                }
                let (rsa, csa) = strides(trans_a, m, k);
                let (rsb, csb) = strides(trans_b, k, n);
                // SAFETY: buffer lengths are checked above and the strides
                // describe dense row-major storage of exactly those extents.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(ta: bool, tb: bool, m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let at = |i: usize, p: usize| if ta { a[p * m + i] } else { a[i * k + p] };
        let bt = |p: usize, j: usize| if tb { b[j * k + p] } else { b[p * n + j] };
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = (0..k).map(|p| at(i, p) * bt(p, j)).sum();
            }
        }
        out
    }

    #[test]
    fn gemm_matches_naive_for_all_transpose_combinations() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|v| v as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..k * n).map(|v| (v as f64).sin()).collect();
        for ta in [false, true] {
            for tb in [false, true] {
                let mut c = vec![0.0; m * n];
                f64::gemm(ta, tb, m, k, n, &a, &b, 0.0, &mut c);
                let want = naive(ta, tb, m, k, n, &a, &b);
                for (x, y) in c.iter().zip(&want) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
