//! Vector-valued fields on the unit torus, sampled on a uniform periodic grid.
//!
//! A [`Field`] stores `n` components on `N` grid points `x_j = j / N`.
//! Its spectral counterpart [`SpectralField`] holds the Fourier coefficients
//! with the convention
//!
//! ```text
//! û(m) = (1/N) Σ_j u(x_j) exp(-2πi m x_j),   u(x_j) = Σ_m û(m) exp(2πi m x_j)
//! ```
//!
//! so `û(0)` is the spatial average and `‖u‖₂² = Σ_m |û(m)|²`. Coefficients are
//! kept in transform order: index `k < N/2` is mode `m = k`, index `k >= N/2`
//! is mode `m = k - N` (the Nyquist mode is `-N/2`).
//!
//! Norms use the continuum normalization (quadrature weight `dx = 1/N`).

use crate::error::{Error, Result};
use crate::fft::Radix2Plan;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

/// Relative tolerance used by [`idft`] to accept a spectrum as conjugate symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct GridSpec {
    points: usize,
}

impl GridSpec {
    pub fn new(points: usize) -> Result<Self> {
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(points));
        }
        Ok(Self { points })
    }

    /// Number of grid points `N`.
    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 / self.points as f64
    }

    /// Fourier mode stored at transform index `k`.
    pub fn mode(&self, k: usize) -> i64 {
        let n = self.points as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Transform index of mode `m`, for `-N/2 <= m < N/2`.
    pub fn index(&self, m: i64) -> usize {
        let n = self.points as i64;
        debug_assert!(-n / 2 <= m && m < n / 2);
        m.rem_euclid(n) as usize
    }

    /// `(2πm)²` for the mode at transform index `k`.
    pub fn wavenumber_sq(&self, k: usize) -> f64 {
        let w = 2.0 * PI * self.mode(k) as f64;
        w * w
    }
}

impl TryFrom<usize> for GridSpec {
    type Error = Error;

    fn try_from(points: usize) -> Result<Self> {
        Self::new(points)
    }
}

impl From<GridSpec> for usize {
    fn from(g: GridSpec) -> usize {
        g.points
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<Radix2Plan>>> = RefCell::new(HashMap::new());
}

/// Shared per-thread transform plan for length `len`.
pub(crate) fn plan(len: usize) -> Rc<Radix2Plan> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry(len)
            .or_insert_with(|| Rc::new(Radix2Plan::new(len)))
            .clone()
    })
}

/// An `n`-component real field in physical space, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    components: usize,
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(components: usize, grid: GridSpec) -> Self {
        assert!(components >= 1, "a field needs at least one component");
        Self { components, grid, values: vec![0.0; components * grid.len()] }
    }

    pub fn constant(value: &[f64], grid: GridSpec) -> Self {
        let mut f = Self::zeros(value.len(), grid);
        for (c, &v) in value.iter().enumerate() {
            f.component_mut(c).fill(v);
        }
        f
    }

    /// Builds a field from `f(component, x)`.
    pub fn from_fn(components: usize, grid: GridSpec, f: impl Fn(usize, f64) -> f64) -> Self {
        let mut out = Self::zeros(components, grid);
        for c in 0..components {
            for j in 0..grid.len() {
                out.values[c * grid.len() + j] = f(c, grid.x(j));
            }
        }
        out
    }

    /// Wraps component-major values (`values[c * N + j]`).
    pub fn from_values(components: usize, grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if components == 0 || values.len() != components * grid.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", components * grid.len()),
                found: format!("{} values", values.len()),
            });
        }
        Ok(Self { components, grid, values })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.values[c * n..(c + 1) * n]
    }

    /// Copies the vector `u(x_j)` into `out`.
    pub fn point_into(&self, j: usize, out: &mut [f64]) {
        let n = self.grid.len();
        for (c, o) in out.iter_mut().enumerate().take(self.components) {
            *o = self.values[c * n + j];
        }
    }

    pub fn point(&self, j: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.components];
        self.point_into(j, &mut p);
        p
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.components == other.components && self.grid == other.grid
    }

    pub(crate) fn check_shape(&self, other: &Field) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: format!("n={}, N={}", self.components, self.grid.len()),
                found: format!("n={}, N={}", other.components, other.grid.len()),
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Field {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        debug_assert!(self.same_shape(other));
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        out
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }

    /// Spatial average of each component.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.grid.len() as f64;
        (0..self.components).map(|c| self.component(c).iter().sum::<f64>() / n).collect()
    }
}

/// Fourier coefficients of a real field, in transform order per component.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    components: usize,
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(components: usize, grid: GridSpec) -> Self {
        Self { components, grid, coeffs: vec![Complex64::new(0.0, 0.0); components * grid.len()] }
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.len();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    /// Coefficient `û_c(m)` for `-N/2 <= m < N/2`.
    pub fn get(&self, c: usize, m: i64) -> Complex64 {
        self.component(c)[self.grid.index(m)]
    }

    pub fn set(&mut self, c: usize, m: i64, value: Complex64) {
        let k = self.grid.index(m);
        self.component_mut(c)[k] = value;
    }

    /// Largest violation of `û(-m) = conj(û(m))`, relative to the largest
    /// coefficient magnitude, together with its location.
    pub fn symmetry_defect(&self) -> (f64, usize, i64) {
        let n = self.grid.len();
        let scale = self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut worst = (0.0, 0, 0);
        for c in 0..self.components {
            let comp = self.component(c);
            for k in 0..n {
                let partner = (n - k) % n;
                let d = (comp[partner] - comp[k].conj()).norm() / scale;
                if d > worst.0 {
                    worst = (d, c, self.grid.mode(k));
                }
            }
        }
        worst
    }
}

/// Forward transform with the `1/N` normalization.
pub fn dft(field: &Field) -> SpectralField {
    let n = field.grid.len();
    let plan = plan(n);
    let mut out = SpectralField::zeros(field.components, field.grid);
    let scale = 1.0 / n as f64;
    for c in 0..field.components {
        let dst = out.component_mut(c);
        for (d, &v) in dst.iter_mut().zip(field.component(c)) {
            *d = Complex64::new(v, 0.0);
        }
        plan.forward(dst);
        dst.iter_mut().for_each(|z| *z *= scale);
    }
    out
}

/// Inverse of [`dft`]. Rejects spectra that are not conjugate symmetric,
/// since those cannot come from a real field.
pub fn idft(spectral: &SpectralField) -> Result<Field> {
    let (defect, component, mode) = spectral.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(Error::NotConjugateSymmetric { component, mode, defect });
    }
    Ok(idft_unchecked(spectral))
}

/// Inverse transform keeping only the real part, without the symmetry check.
pub(crate) fn idft_unchecked(spectral: &SpectralField) -> Field {
    let n = spectral.grid.len();
    let plan = plan(n);
    let mut out = Field::zeros(spectral.components, spectral.grid);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..spectral.components {
        buf.copy_from_slice(spectral.component(c));
        plan.inverse(&mut buf);
        for (d, z) in out.component_mut(c).iter_mut().zip(&buf) {
            *d = z.re;
        }
    }
    out
}

/// `(∫ |u|² dx)^{1/2}`.
pub fn l2_norm(field: &Field) -> f64 {
    (field.values.iter().map(|v| v * v).sum::<f64>() * field.grid.dx()).sqrt()
}

/// L² inner product `∫ u·v dx`.
pub fn inner(a: &Field, b: &Field) -> f64 {
    debug_assert!(a.same_shape(b));
    a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum::<f64>() * a.grid.dx()
}

/// Maximum over grid points of the Euclidean norm of `u(x_j)`.
pub fn sup_norm(field: &Field) -> f64 {
    let n = field.grid.len();
    (0..n)
        .map(|j| (0..field.components).map(|c| field.values[c * n + j].powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// `(κ Σ_m (2πm)² |û(m)|²)^{1/2}`, i.e. `(κ ‖∇u‖₂²)^{1/2}`.
pub fn h1_seminorm(field: &Field, kappa: f64) -> f64 {
    let spec = dft(field);
    let grid = field.grid;
    let mut acc = 0.0;
    for c in 0..field.components {
        for (k, z) in spec.component(c).iter().enumerate() {
            acc += grid.wavenumber_sq(k) * z.norm_sqr();
        }
    }
    (kappa * acc).sqrt()
}

/// Applies the periodic heat semigroup generated by `κΔ` for time `t`.
pub fn heat_semigroup(field: &Field, kappa: f64, t: f64) -> Result<Field> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let mut spec = dft(field);
    let grid = field.grid;
    for c in 0..field.components {
        for (k, z) in spec.component_mut(c).iter_mut().enumerate() {
            *z *= (-kappa * grid.wavenumber_sq(k) * t).exp();
        }
    }
    Ok(idft_unchecked(&spec))
}

/// Spectral Laplacian `Δu`.
pub fn laplacian(field: &Field) -> Field {
    let mut spec = dft(field);
    let grid = field.grid;
    for c in 0..field.components {
        for (k, z) in spec.component_mut(c).iter_mut().enumerate() {
            *z *= -grid.wavenumber_sq(k);
        }
    }
    idft_unchecked(&spec)
}
