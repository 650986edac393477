#![allow(dead_code)]

use lyapsync::{Field, PotentialSpec};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Spectral second-derivative matrix on `len` equispaced points, written out
/// as a cosine sum: `D_ij = -(1/N)[Σ_{m=1}^{N/2-1} 2(2πm)² cos(2πm(i-j)/N) + (πN)² (-1)^{i-j}]`.
pub fn spectral_laplacian(len: usize) -> DMatrix<f64> {
    let n = len as f64;
    DMatrix::from_fn(len, len, |i, j| {
        let d = i as f64 - j as f64;
        let mut s = 0.0;
        for m in 1..len / 2 {
            let w = 2.0 * PI * m as f64;
            s += 2.0 * w * w * (w * d / n).cos();
        }
        s += (PI * n).powi(2) * (PI * d).cos();
        -s / n
    })
}

/// Largest eigenvalue of `κΔ - ∇²V(u(·))` from a dense symmetric eigensolve.
pub fn dense_lambda_plus(u: &Field, spec: &PotentialSpec, kappa: f64) -> f64 {
    let len = u.grid().len();
    let n = u.components();
    let lap = spectral_laplacian(len);
    let mut a = DMatrix::<f64>::zeros(n * len, n * len);
    for c in 0..n {
        a.view_mut((c * len, c * len), (len, len)).copy_from(&(&lap * kappa));
    }
    for j in 0..len {
        let h = spec.hess_v(&u.point(j));
        for r in 0..n {
            for c in 0..n {
                a[(r * len + j, c * len + j)] -= h[r * n + c];
            }
        }
    }
    a.symmetric_eigen().eigenvalues.max()
}
