//! Scalar abstraction and the inner loops every layer is built from.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

/// Floating-point storage type of a network (f32 in production, f64 for
/// gradient checks and quantization simulation).
pub trait Real: Float + Default + Debug + Sum + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

const LANES: usize = 8;

/// Dot product with eight independent partial sums so the loop vectorizes.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ta.iter().zip(tb) {
        tail = tail + *x * *y;
    }
    let s01 = (acc[0] + acc[4]) + (acc[1] + acc[5]);
    let s23 = (acc[2] + acc[6]) + (acc[3] + acc[7]);
    (s01 + s23) + tail
}

/// y += a·x.
#[inline]
pub fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * *xi;
    }
}

/// y += a·x with a 64-bit accumulator.
#[inline]
pub fn axpy_wide<T: Real>(y: &mut [f64], a: f64, x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi.as_f64();
    }
}

/// Gathers strided input windows into rows: `cols[t][c·k + j] = x[c][t·s + j]`.
pub fn im2col<T: Real>(
    x: &[T],
    in_ch: usize,
    in_len: usize,
    kernel: usize,
    stride: usize,
    cols: &mut [T],
) {
    let out_len = cols.len() / (in_ch * kernel);
    let row = in_ch * kernel;
    for t in 0..out_len {
        let dst = &mut cols[t * row..(t + 1) * row];
        for c in 0..in_ch {
            let src = &x[c * in_len + t * stride..c * in_len + t * stride + kernel];
            dst[c * kernel..(c + 1) * kernel].copy_from_slice(src);
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds rows back into `dx` (which is zeroed first).
pub fn col2im<T: Real>(
    dcols: &[T],
    in_ch: usize,
    in_len: usize,
    kernel: usize,
    stride: usize,
    dx: &mut [T],
) {
    dx.iter_mut().for_each(|v| *v = T::zero());
    let row = in_ch * kernel;
    let out_len = dcols.len() / row;
    for t in 0..out_len {
        let src = &dcols[t * row..(t + 1) * row];
        for c in 0..in_ch {
            let dst = &mut dx[c * in_len + t * stride..c * in_len + t * stride + kernel];
            for (d, s) in dst.iter_mut().zip(&src[c * kernel..(c + 1) * kernel]) {
                *d = *d + *s;
            }
        }
    }
}

/// ln(1 + eˣ) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_for_all_tail_lengths() {
        for n in 0..40 {
            let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!((dot(&a, &b) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), c> = <x, col2im(c)>
        let (ch, len, k, s) = (3, 23, 5, 3);
        let out_len = (len - k) / s + 1;
        let x: Vec<f64> = (0..ch * len).map(|i| (i as f64).sin()).collect();
        let c: Vec<f64> = (0..out_len * ch * k)
            .map(|i| (i as f64 * 0.7).cos())
            .collect();
        let mut cols = vec![0.0; c.len()];
        im2col(&x, ch, len, k, s, &mut cols);
        let mut dx = vec![1.0; x.len()];
        col2im(&c, ch, len, k, s, &mut dx);
        assert!((dot(&cols, &c) - dot(&x, &dx)).abs() < 1e-12);
    }

    #[test]
    fn softplus_and_sigmoid() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(100.0), 100.0);
        assert!(softplus(-50.0) > 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }
}
