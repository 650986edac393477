//! Iterative radix-2 Cooley-Tukey transform.
//!
//! Only power-of-two lengths are supported. The plan caches the twiddle
//! factors and the bit-reversal permutation so repeated transforms of the
//! same length allocate nothing.

use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct Radix2Plan {
    len: usize,
    /// `twiddles[k] = exp(-2 pi i k / len)` for `k < len / 2`.
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Radix2Plan {
    /// # Panics
    /// Panics if `len` is not a power of two.
    pub fn new(len: usize) -> Self {
        assert!(len.is_power_of_two(), "radix-2 length must be a power of two, got {len}");
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        let bits = len.trailing_zeros();
        let bitrev = (0..len)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Self { len, twiddles, bitrev }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform, `X[k] = sum_j x[j] exp(-2 pi i j k / N)`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    /// Unnormalized inverse transform, `x[j] = sum_k X[k] exp(+2 pi i j k / N)`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, true);
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.len);
        let n = self.len;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}

/// Forward transforms of two real sequences with one complex FFT.
///
/// Writes the unnormalized spectra of `a` and `b` into `out_a`, `out_b`.
/// `scratch` must have the plan's length.
pub fn forward_real_pair(
    plan: &Radix2Plan,
    a: &[f64],
    b: &[f64],
    scratch: &mut [Complex64],
    out_a: &mut [Complex64],
    out_b: &mut [Complex64],
) {
    let n = plan.len();
    for j in 0..n {
        scratch[j] = Complex64::new(a[j], b[j]);
    }
    plan.forward(scratch);
    for k in 0..n {
        let z = scratch[k];
        let zc = scratch[(n - k) % n].conj();
        out_a[k] = (z + zc) * 0.5;
        // (z - zc) / 2i
        let d = (z - zc) * 0.5;
        out_b[k] = Complex64::new(d.im, -d.re);
    }
}

/// Inverse transforms of two conjugate-symmetric spectra with one complex
/// FFT, keeping real parts.
pub fn inverse_real_pair(
    plan: &Radix2Plan,
    a_hat: &[Complex64],
    b_hat: &[Complex64],
    scratch: &mut [Complex64],
    out_a: &mut [f64],
    out_b: &mut [f64],
) {
    let n = plan.len();
    for k in 0..n {
        // a + i b
        scratch[k] = a_hat[k] + Complex64::new(-b_hat[k].im, b_hat[k].re);
    }
    plan.inverse(scratch);
    for j in 0..n {
        out_a[j] = scratch[j].re;
        out_b[j] = scratch[j].im;
    }
}
