//! Potentials `V: ℝⁿ → ℝ≥0` with analytic derivatives and metadata about
//! their minima.
//!
//! Two families are supported: potentials with finitely many non-degenerate
//! minima (positive definite Hessian at each minimum), and rotationally
//! invariant potentials `V(u) = g(|u|²)` whose minima form spheres of radii
//! `rᵢ` with `g(rᵢ²) = g'(rᵢ²) = 0 < g''(rᵢ²)`.
//!
//! The drift of the reaction-diffusion system is `b(u) = -∇V(u)`; see
//! [`PotentialSpec::drift`].

use crate::error::{Error, Result};
use crate::field::Field;
use serde::{Deserialize, Serialize};

/// Polynomial `g(s) = Σ_k coeffs[k] s^k` with exact derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    coeffs: Vec<f64>,
}

impl RadialProfile {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// `c (s - a)² (s - b)²` expanded.
    pub fn double_root(c: f64, a: f64, b: f64) -> Self {
        // (s-a)(s-b) = s² - (a+b)s + ab, squared.
        let p = [a * b, -(a + b), 1.0];
        let mut coeffs = vec![0.0; 5];
        for (i, x) in p.iter().enumerate() {
            for (j, y) in p.iter().enumerate() {
                coeffs[i + j] += c * x * y;
            }
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `d`-th derivative at `s`.
    pub fn derivative(&self, d: usize, s: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(d).rev() {
            let falling: f64 = ((k - d + 1)..=k).map(|x| x as f64).product();
            acc = acc * s + c * falling;
        }
        acc
    }

    pub fn g(&self, s: f64) -> f64 {
        self.derivative(0, s)
    }
    pub fn g1(&self, s: f64) -> f64 {
        self.derivative(1, s)
    }
    pub fn g2(&self, s: f64) -> f64 {
        self.derivative(2, s)
    }
    pub fn g3(&self, s: f64) -> f64 {
        self.derivative(3, s)
    }
}

/// Closed-form potentials with isolated minima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PointModel {
    /// `¼(u² - 1)²`, scalar.
    DoubleWell,
    /// `¼(u² - 1)² (1 + ¼(u + 1)²)`, scalar, curvatures 4 at `+1` and 2 at `-1`.
    TiltedDoubleWell,
    /// `a|u|²/2` in any dimension.
    Quadratic { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub point: Vec<f64>,
    /// Smallest eigenvalue of the Hessian at `point`.
    pub lambda_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PotentialKind {
    NonDegenerate { model: PointModel, minima: Vec<Minimum> },
    RotInvariant { profile: RadialProfile, radii: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub name: String,
    /// Ambient dimension `n`.
    pub n: usize,
    pub kind: PotentialKind,
    /// Polynomial growth exponent `p` (`V ~ |u|^{2p}`).
    pub growth_p: f64,
    /// `(c, C)` with `-∇V(u)·u ≤ -c|u|^{2p} + C` for all `u`.
    pub coercivity: (f64, f64),
}

impl PotentialSpec {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            PotentialKind::NonDegenerate { .. } => "non-degenerate",
            PotentialKind::RotInvariant { .. } => "rotationally invariant",
        }
    }

    pub fn is_rot_invariant(&self) -> bool {
        matches!(self.kind, PotentialKind::RotInvariant { .. })
    }

    pub fn profile(&self) -> Result<(&RadialProfile, &[f64])> {
        match &self.kind {
            PotentialKind::RotInvariant { profile, radii } => Ok((profile, radii)),
            _ => Err(Error::WrongKind { expected: "rotationally invariant", found: self.kind_name() }),
        }
    }

    pub fn minima(&self) -> Result<&[Minimum]> {
        match &self.kind {
            PotentialKind::NonDegenerate { minima, .. } => Ok(minima),
            _ => Err(Error::WrongKind { expected: "non-degenerate", found: self.kind_name() }),
        }
    }

    /// Number of connected components of the minimum set.
    pub fn minimum_count(&self) -> usize {
        match &self.kind {
            PotentialKind::NonDegenerate { minima, .. } => minima.len(),
            PotentialKind::RotInvariant { radii, .. } => radii.len(),
        }
    }

    pub fn v_eval(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.n);
        match &self.kind {
            PotentialKind::RotInvariant { profile, .. } => profile.g(norm_sq(z)),
            PotentialKind::NonDegenerate { model, .. } => match model {
                PointModel::DoubleWell => 0.25 * (z[0] * z[0] - 1.0).powi(2),
                PointModel::TiltedDoubleWell => {
                    let u = z[0];
                    0.25 * (u * u - 1.0).powi(2) * (1.0 + 0.25 * (u + 1.0).powi(2))
                }
                PointModel::Quadratic { a } => 0.5 * a * norm_sq(z),
            },
        }
    }

    /// Writes `∇V(z)` into `out`.
    pub fn grad_into(&self, z: &[f64], out: &mut [f64]) {
        match &self.kind {
            PotentialKind::RotInvariant { profile, .. } => {
                let two_g1 = 2.0 * profile.g1(norm_sq(z));
                for (o, &x) in out.iter_mut().zip(z) {
                    *o = two_g1 * x;
                }
            }
            PotentialKind::NonDegenerate { model, .. } => match model {
                PointModel::DoubleWell => out[0] = (z[0] * z[0] - 1.0) * z[0],
                PointModel::TiltedDoubleWell => {
                    let u = z[0];
                    let (f, f1) = (0.25 * (u * u - 1.0).powi(2), (u * u - 1.0) * u);
                    let (q, q1) = (1.0 + 0.25 * (u + 1.0).powi(2), 0.5 * (u + 1.0));
                    out[0] = f1 * q + f * q1;
                }
                PointModel::Quadratic { a } => {
                    for (o, &x) in out.iter_mut().zip(z) {
                        *o = a * x;
                    }
                }
            },
        }
    }

    pub fn grad_v(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.grad_into(z, &mut out);
        out
    }

    /// Writes the row-major `n × n` Hessian into `out`.
    pub fn hess_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        match &self.kind {
            PotentialKind::RotInvariant { profile, .. } => {
                let s = norm_sq(z);
                let (g1, g2) = (profile.g1(s), profile.g2(s));
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = 4.0 * g2 * z[i] * z[j] + if i == j { 2.0 * g1 } else { 0.0 };
                    }
                }
            }
            PotentialKind::NonDegenerate { model, .. } => match model {
                PointModel::DoubleWell => out[0] = 3.0 * z[0] * z[0] - 1.0,
                PointModel::TiltedDoubleWell => {
                    let u = z[0];
                    let (f, f1, f2) = (0.25 * (u * u - 1.0).powi(2), (u * u - 1.0) * u, 3.0 * u * u - 1.0);
                    let (q, q1, q2) = (1.0 + 0.25 * (u + 1.0).powi(2), 0.5 * (u + 1.0), 0.5);
                    out[0] = f2 * q + 2.0 * f1 * q1 + f * q2;
                }
                PointModel::Quadratic { a } => {
                    for i in 0..n {
                        for j in 0..n {
                            out[i * n + j] = if i == j { *a } else { 0.0 };
                        }
                    }
                }
            },
        }
    }

    pub fn hess_v(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        self.hess_into(z, &mut out);
        out
    }

    /// Eigenvalues of `∇²V(z)` in ascending order.
    pub fn hess_eigenvalues(&self, z: &[f64]) -> Vec<f64> {
        sym_eigenvalues(self.n, &self.hess_v(z))
    }

    /// Pointwise drift `b(u) = -∇V(u)` of a field.
    pub fn drift(&self, u: &Field) -> Field {
        let mut out = Field::zeros(u.components(), u.grid());
        self.drift_into(u, &mut out);
        out
    }

    pub(crate) fn drift_into(&self, u: &Field, out: &mut Field) {
        let n = self.n;
        let len = u.grid().len();
        let mut z = vec![0.0; n];
        let mut g = vec![0.0; n];
        for j in 0..len {
            u.point_into(j, &mut z);
            self.grad_into(&z, &mut g);
            for c in 0..n {
                out.values_mut()[c * len + j] = -g[c];
            }
        }
    }

    /// `𝐕(u) = ∫ V(u(x)) dx` by the periodic rectangle rule.
    pub fn bulk_potential(&self, u: &Field) -> f64 {
        let len = u.grid().len();
        let mut z = vec![0.0; self.n];
        let mut acc = 0.0;
        for j in 0..len {
            u.point_into(j, &mut z);
            acc += self.v_eval(&z);
        }
        acc / len as f64
    }

    /// Sup-norm distance from `u` to the set of minima: `minᵢ maxⱼ |u(xⱼ) - wᵢ|`
    /// for point minima, `minᵢ maxⱼ ||u(xⱼ)| - rᵢ|` for spheres.
    pub fn dist_sup(&self, u: &Field) -> f64 {
        let len = u.grid().len();
        let mut z = vec![0.0; self.n];
        match &self.kind {
            PotentialKind::NonDegenerate { minima, .. } => minima
                .iter()
                .map(|m| {
                    (0..len)
                        .map(|j| {
                            u.point_into(j, &mut z);
                            z.iter().zip(&m.point).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                        })
                        .fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min),
            PotentialKind::RotInvariant { radii, .. } => radii
                .iter()
                .map(|&r| {
                    (0..len)
                        .map(|j| {
                            u.point_into(j, &mut z);
                            (norm_sq(&z).sqrt() - r).abs()
                        })
                        .fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Index of the minimum (or sphere) closest to `u` in L².
    pub fn nearest_minimum(&self, u: &Field) -> usize {
        let len = u.grid().len();
        let mut z = vec![0.0; self.n];
        let dists: Vec<f64> = match &self.kind {
            PotentialKind::NonDegenerate { minima, .. } => minima
                .iter()
                .map(|m| {
                    (0..len)
                        .map(|j| {
                            u.point_into(j, &mut z);
                            z.iter().zip(&m.point).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                        })
                        .sum()
                })
                .collect(),
            PotentialKind::RotInvariant { radii, .. } => radii
                .iter()
                .map(|&r| {
                    (0..len)
                        .map(|j| {
                            u.point_into(j, &mut z);
                            (norm_sq(&z).sqrt() - r).powi(2)
                        })
                        .sum()
                })
                .collect(),
        };
        dists
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Largest distance of a minimum from the origin (at least 1).
    fn minima_extent(&self) -> f64 {
        let r = match &self.kind {
            PotentialKind::NonDegenerate { minima, .. } => {
                minima.iter().map(|m| norm_sq(&m.point).sqrt()).fold(0.0, f64::max)
            }
            PotentialKind::RotInvariant { radii, .. } => radii.iter().cloned().fold(0.0, f64::max),
        };
        r.max(1.0)
    }

    /// Largest Hessian eigenvalue magnitude on the ball of radius
    /// `1.25 × (extent of the minima)`; the explicit-part stiffness used for
    /// time-step diagnostics.
    pub fn stiffness_bound(&self) -> f64 {
        let rho = 1.25 * self.minima_extent();
        let samples = 400;
        let mut worst: f64 = 0.0;
        for i in 0..=samples {
            let r = rho * i as f64 / samples as f64;
            for sign in [1.0, -1.0] {
                let mut z = vec![0.0; self.n];
                z[0] = sign * r;
                for ev in self.hess_eigenvalues(&z) {
                    worst = worst.max(ev.abs());
                }
            }
        }
        worst
    }

    /// Smallest `R` (on a radial scan up to 20) such that the Hessian is
    /// bounded below by `Id` for every `|u| >= R`. `None` if no such `R` was
    /// found on the scan.
    pub fn hessian_bound_radius(&self) -> Option<f64> {
        let samples = 4000;
        let rmax = 20.0;
        let mut last_bad: Option<f64> = None;
        for i in 0..=samples {
            let r = rmax * i as f64 / samples as f64;
            for sign in [1.0, -1.0] {
                let mut z = vec![0.0; self.n];
                z[0] = sign * r;
                if self.hess_eigenvalues(&z)[0] < 1.0 {
                    last_bad = Some(r);
                }
            }
        }
        match last_bad {
            None => Some(0.0),
            Some(r) if r >= rmax => None,
            Some(r) => Some(r + rmax / samples as f64),
        }
    }
}

pub(crate) fn norm_sq(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum()
}

/// Ascending eigenvalues of a small symmetric row-major matrix.
pub fn sym_eigenvalues(n: usize, m: &[f64]) -> Vec<f64> {
    if n == 1 {
        return vec![m[0]];
    }
    let mat = nalgebra::DMatrix::from_row_slice(n, n, m);
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(mat).eigenvalues.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn double_well() -> PotentialSpec {
    PotentialSpec {
        name: "double_well".into(),
        n: 1,
        kind: PotentialKind::NonDegenerate {
            model: PointModel::DoubleWell,
            minima: vec![
                Minimum { point: vec![-1.0], lambda_min: 2.0 },
                Minimum { point: vec![1.0], lambda_min: 2.0 },
            ],
        },
        growth_p: 2.0,
        coercivity: (0.5, 0.5),
    }
}

pub fn tilted_double_well() -> PotentialSpec {
    PotentialSpec {
        name: "tilted_double_well".into(),
        n: 1,
        kind: PotentialKind::NonDegenerate {
            model: PointModel::TiltedDoubleWell,
            minima: vec![
                Minimum { point: vec![-1.0], lambda_min: 2.0 },
                Minimum { point: vec![1.0], lambda_min: 4.0 },
            ],
        },
        growth_p: 3.0,
        coercivity: (0.25, 0.5),
    }
}

pub fn quadratic(n: usize, a: f64) -> PotentialSpec {
    PotentialSpec {
        name: "quadratic".into(),
        n,
        kind: PotentialKind::NonDegenerate {
            model: PointModel::Quadratic { a },
            minima: vec![Minimum { point: vec![0.0; n], lambda_min: a }],
        },
        growth_p: 1.0,
        coercivity: (a, 0.0),
    }
}

/// `V(u) = ¼(|u|² - 1)²`, minima on the unit sphere.
pub fn sombrero(n: usize) -> PotentialSpec {
    PotentialSpec {
        name: "sombrero".into(),
        n,
        kind: PotentialKind::RotInvariant {
            profile: RadialProfile::new(vec![0.25, -0.5, 0.25]),
            radii: vec![1.0],
        },
        growth_p: 2.0,
        coercivity: (0.5, 0.5),
    }
}

/// `g(s) = c (s - r₁²)² (s - r₂²)²` with `r₁ = 1`, `r₂ = 1.5` and `c` chosen so
/// that `g''(rᵢ²) = ½` on both spheres.
pub fn two_sphere(n: usize) -> PotentialSpec {
    let (r1, r2) = (1.0f64, 1.5f64);
    let gap = r2 * r2 - r1 * r1;
    let c = 0.5 / (2.0 * gap * gap);
    PotentialSpec {
        name: "two_sphere".into(),
        n,
        kind: PotentialKind::RotInvariant {
            profile: RadialProfile::double_root(c, r1 * r1, r2 * r2),
            radii: vec![r1, r2],
        },
        growth_p: 4.0,
        coercivity: (0.5, 80.0),
    }
}

/// All built-in potentials, with the sombrero in dimensions 2, 3 and 4.
pub fn builtin_catalog() -> Vec<PotentialSpec> {
    vec![
        double_well(),
        tilted_double_well(),
        quadratic(1, 1.0),
        sombrero(2),
        sombrero(3),
        sombrero(4),
        two_sphere(3),
    ]
}

/// Looks up a catalog potential by name. `n` overrides the dimension where
/// the family allows it; `a` is the quadratic curvature.
pub fn by_name(name: &str, n: Option<usize>, a: Option<f64>) -> Result<PotentialSpec> {
    let scalar = |spec: PotentialSpec| match n {
        Some(d) if d != 1 => Err(Error::InvalidConfig(format!("potential {name} is scalar, got n = {d}"))),
        _ => Ok(spec),
    };
    match name {
        "double_well" => scalar(double_well()),
        "tilted_double_well" => scalar(tilted_double_well()),
        "quadratic" => Ok(quadratic(n.unwrap_or(1), a.unwrap_or(1.0))),
        "sombrero" => Ok(sombrero(n.unwrap_or(3))),
        "two_sphere" => Ok(two_sphere(n.unwrap_or(3))),
        other => Err(Error::InvalidConfig(format!("unknown potential '{other}'"))),
    }
}
