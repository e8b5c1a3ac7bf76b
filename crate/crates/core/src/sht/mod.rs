//! Real spherical-harmonic transforms on Gauss–Legendre grids.
//!
//! Harmonics are real and orthonormal on the unit sphere,
//! `∫ Y_n^k Y_n'^k' dS = δ`, with `k = 1..=2n+1`:
//! `k = 1` is the zonal (`m = 0`) function, `k = 2m` carries `cos(mφ)` and
//! `k = 2m + 1` carries `sin(mφ)`. Coefficients are stored degree-major, so
//! `(n, k)` lives at flat index `n² + k − 1`.
//!
//! Tangent vectors are given by their components on the local orthonormal
//! frame `(e_θ, e_φ)` (colatitude, longitude). The rotation
//! `u⊥ = (u_φ, −u_θ)` is used throughout, so `rot ∇⊥ψ = −Δψ`.

mod grid;
pub mod legendre;

pub use grid::{build_grid, Grid, HessianSamples, VectorSamples};

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Degree-`n` eigenvalue `n(n+1)` of `−Δ`.
#[inline]
pub fn eigenvalue(n: usize) -> f64 {
    (n * (n + 1)) as f64
}

/// Number of real harmonics of degree at most `trunc`.
#[inline]
pub fn mode_count(trunc: usize) -> usize {
    (trunc + 1) * (trunc + 1)
}

/// Flat index of `(n, k)` with `k` in `1..=2n+1`.
#[inline]
pub fn index(n: usize, k: usize) -> usize {
    debug_assert!(k >= 1 && k <= 2 * n + 1);
    n * n + k - 1
}

#[inline]
pub(crate) fn cos_index(n: usize, m: usize) -> usize {
    if m == 0 {
        n * n
    } else {
        n * n + 2 * m - 1
    }
}

#[inline]
pub(crate) fn sin_index(n: usize, m: usize) -> usize {
    n * n + 2 * m
}

/// Degree of the mode stored at flat index `i`.
#[inline]
pub fn degree_of(i: usize) -> usize {
    let mut n = (i as f64).sqrt() as usize;
    while n * n > i {
        n -= 1;
    }
    while (n + 1) * (n + 1) <= i {
        n += 1;
    }
    n
}

/// Normalization of the longitude factor for order `m`.
#[inline]
pub(crate) fn fourier_norm(m: usize) -> f64 {
    if m == 0 {
        1.0 / (2.0 * PI).sqrt()
    } else {
        1.0 / PI.sqrt()
    }
}

/// Truncated real spherical-harmonic spectrum of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScalar {
    trunc: usize,
    coeffs: Vec<f64>,
}

impl SpectralScalar {
    pub fn zeros(trunc: usize) -> Self {
        Self { trunc, coeffs: vec![0.0; mode_count(trunc)] }
    }

    pub fn from_coeffs(trunc: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != mode_count(trunc) {
            return Err(Error::DimensionMismatch { expected: mode_count(trunc), got: coeffs.len() });
        }
        if let Some(&bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter { name: "coefficient", value: bad });
        }
        Ok(Self { trunc, coeffs })
    }

    /// A single harmonic `Y_n^k` with unit coefficient.
    pub fn single(trunc: usize, n: usize, k: usize) -> Self {
        let mut s = Self::zeros(trunc);
        s.set(n, k, 1.0);
        s
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.coeffs[index(n, k)]
    }

    pub fn set(&mut self, n: usize, k: usize, value: f64) {
        self.coeffs[index(n, k)] = value;
    }

    /// Mean-value coefficient `a[0][1]`.
    pub fn mean_coeff(&self) -> f64 {
        self.coeffs[0]
    }

    /// `Σ a²`, i.e. the squared L² norm on the sphere.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `Σ w(n) a²` for a degree-dependent weight.
    pub fn weighted_norm_sq(&self, weight: impl Fn(usize) -> f64) -> f64 {
        self.weighted_dot(self, weight)
    }

    /// `Σ w(n) a b`; the spectra may have different truncations.
    pub fn weighted_dot(&self, other: &Self, weight: impl Fn(usize) -> f64) -> f64 {
        let top = self.trunc.min(other.trunc);
        let mut sum = 0.0;
        for n in 0..=top {
            let w = weight(n);
            let lo = n * n;
            let hi = (n + 1) * (n + 1);
            let dot: f64 = self.coeffs[lo..hi].iter().zip(&other.coeffs[lo..hi]).map(|(a, b)| a * b).sum();
            sum += w * dot;
        }
        sum
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.weighted_dot(other, |_| 1.0)
    }

    /// Multiplies every degree-`n` block by `f(n)`.
    pub fn map_degree(&self, f: impl Fn(usize) -> f64) -> Self {
        let mut out = self.clone();
        out.scale_degree(f);
        out
    }

    pub fn scale_degree(&mut self, f: impl Fn(usize) -> f64) {
        for n in 0..=self.trunc {
            let s = f(n);
            for c in &mut self.coeffs[n * n..(n + 1) * (n + 1)] {
                *c *= s;
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_degree(|_| s)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        assert_eq!(self.trunc, other.trunc, "truncation mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// Copy with truncation changed (zero-padded or cut).
    pub fn with_trunc(&self, trunc: usize) -> Self {
        let mut out = Self::zeros(trunc);
        let keep = mode_count(self.trunc.min(trunc));
        out.coeffs[..keep].copy_from_slice(&self.coeffs[..keep]);
        out
    }

    /// Longitude derivative `∂φ` applied in coefficient space.
    pub fn dphi(&self) -> Self {
        let mut out = Self::zeros(self.trunc);
        for n in 1..=self.trunc {
            for m in 1..=n {
                let (ic, is) = (cos_index(n, m), sin_index(n, m));
                let mf = m as f64;
                out.coeffs[ic] = mf * self.coeffs[is];
                out.coeffs[is] = -mf * self.coeffs[ic];
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.trunc, other.trunc, "truncation mismatch");
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// Values of every harmonic up to `trunc` and its surface gradient at one
/// point, indexed like [`SpectralScalar`] coefficients.
#[derive(Debug, Clone)]
pub struct BasisPoint {
    pub trunc: usize,
    pub value: Vec<f64>,
    /// `∂θ Y`.
    pub grad_theta: Vec<f64>,
    /// `(1/sin θ) ∂φ Y`.
    pub grad_phi: Vec<f64>,
}

impl BasisPoint {
    /// Evaluates the basis at colatitude `theta` in `(0, π)` and longitude `phi`.
    pub fn new(trunc: usize, theta: f64, phi: f64) -> Self {
        let (x, s) = (theta.cos(), theta.sin());
        let lmc = legendre::lm_count(trunc);
        let mut p = vec![0.0; lmc];
        let mut dp = vec![0.0; lmc];
        legendre::legendre_column(trunc, x, s, &mut p, &mut dp);
        let nm = mode_count(trunc);
        let mut value = vec![0.0; nm];
        let mut grad_theta = vec![0.0; nm];
        let mut grad_phi = vec![0.0; nm];
        for m in 0..=trunc {
            let norm = fourier_norm(m);
            let (cm, sm) = ((m as f64 * phi).cos(), (m as f64 * phi).sin());
            let mf = m as f64;
            for n in m..=trunc {
                let l = legendre::lm_index(trunc, n, m);
                let (pv, dv) = (p[l] * norm, dp[l] * norm);
                let ic = cos_index(n, m);
                value[ic] = pv * cm;
                grad_theta[ic] = dv * cm;
                grad_phi[ic] = -mf * pv * sm / s;
                if m > 0 {
                    let is = sin_index(n, m);
                    value[is] = pv * sm;
                    grad_theta[is] = dv * sm;
                    grad_phi[is] = mf * pv * cm / s;
                }
            }
        }
        Self { trunc, value, grad_theta, grad_phi }
    }

    /// Point value of a spectrum.
    pub fn eval(&self, spectrum: &SpectralScalar) -> f64 {
        dot_prefix(&self.value, spectrum.coeffs())
    }

    /// Surface gradient `(∂θ f, (1/sin θ) ∂φ f)` of a spectrum.
    pub fn eval_grad(&self, spectrum: &SpectralScalar) -> [f64; 2] {
        [dot_prefix(&self.grad_theta, spectrum.coeffs()), dot_prefix(&self.grad_phi, spectrum.coeffs())]
    }
}

fn dot_prefix(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest degree accepted by the pointwise identity checks.
pub const MAX_CHECK_DEGREE: usize = 512;

/// Max over `points` (colatitude, longitude) of
/// `|Σ_k Y_n^k(s)² − (2n+1)/(4π)|`.
pub fn addition_theorem_check(n: usize, points: &[(f64, f64)]) -> Result<f64> {
    identity_check(n, points, |b, i| b.value[i] * b.value[i], 1.0)
}

/// Max over `points` of `|Σ_k |∇Y_n^k(s)|² − n(n+1)(2n+1)/(4π)|`.
pub fn gradient_addition_check(n: usize, points: &[(f64, f64)]) -> Result<f64> {
    identity_check(n, points, |b, i| b.grad_theta[i].powi(2) + b.grad_phi[i].powi(2), eigenvalue(n))
}

fn identity_check(
    n: usize,
    points: &[(f64, f64)],
    term: impl Fn(&BasisPoint, usize) -> f64,
    factor: f64,
) -> Result<f64> {
    if n > MAX_CHECK_DEGREE {
        return Err(Error::DegreeTooLarge { n, max: MAX_CHECK_DEGREE });
    }
    let target = factor * (2 * n + 1) as f64 / (4.0 * PI);
    let mut worst: f64 = 0.0;
    for &(theta, phi) in points {
        if !(theta > 0.0 && theta < PI && phi.is_finite()) {
            return Err(Error::InvalidParameter { name: "theta", value: theta });
        }
        let basis = BasisPoint::new(n, theta, phi);
        let sum: f64 = (1..=2 * n + 1).map(|k| term(&basis, index(n, k))).sum();
        worst = worst.max((sum - target).abs());
    }
    Ok(worst)
}

/// Uniformly distributed points on the sphere as (colatitude, longitude).
pub fn random_points(count: usize, rng: &mut impl rand::Rng) -> Vec<(f64, f64)> {
    (0..count)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            (z.acos(), phi)
        })
        .collect()
}
