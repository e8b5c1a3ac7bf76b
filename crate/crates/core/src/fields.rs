//! Divergence-free tangent fields and the operator calculus on them.
//!
//! On the whole sphere every divergence-free tangent field is `∇⊥ψ` for a
//! streamfunction `ψ` without a mean, so a [`DivFreeField`] stores only the
//! streamfunction spectrum `c[n][k]`, `n >= 1`. In that representation
//!
//! * `rot ∇⊥ψ = −Δψ`, with coefficients `Λ_n c`,
//! * the vector Laplacian acts as `c ↦ −Λ_n c`,
//! * `(1 − αΔ)^{-1}` divides by `1 + αΛ_n`,
//! * `‖∇⊥ψ‖² = Σ Λ_n c²` and `‖rot ∇⊥ψ‖² = Σ Λ_n² c²`,
//!
//! where `Λ_n = n(n+1)`. The Leray projection is the identity here.

use crate::error::{positive, Error, Result};
use crate::sht::{eigenvalue, Grid, HessianSamples, SpectralScalar, VectorSamples};
use rand::Rng;
use rand_distr::StandardNormal;

/// Regularization length² `alpha` and Ekman damping rate `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl AlphaParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        Ok(Self { alpha: positive("alpha", alpha)?, gamma: positive("gamma", gamma)? })
    }
}

/// Divergence-free tangent field `∇⊥ψ`, stored as the spectrum of `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DivFreeField {
    psi: SpectralScalar,
}

impl DivFreeField {
    pub fn zeros(trunc: usize) -> Self {
        Self { psi: SpectralScalar::zeros(trunc) }
    }

    /// Field `∇⊥ψ`. A constant in `ψ` carries no velocity and is dropped.
    pub fn from_streamfunction(mut psi: SpectralScalar) -> Self {
        psi.coeffs_mut()[0] = 0.0;
        Self { psi }
    }

    /// The field whose rot is `omega` (which must have zero mean).
    pub fn from_rot(omega: &SpectralScalar) -> Result<Self> {
        check_zero_mean(omega)?;
        Ok(Self::from_streamfunction(omega.map_degree(inverse_eigenvalue)))
    }

    /// Toroidal basis field `w_n^k = Λ_n^{-1/2} ∇⊥Y_n^k`, unit L² norm.
    pub fn basis(trunc: usize, n: usize, k: usize) -> Self {
        assert!(n >= 1, "degree-0 vector harmonics do not exist");
        let mut psi = SpectralScalar::zeros(trunc);
        psi.set(n, k, eigenvalue(n).sqrt().recip());
        Self { psi }
    }

    /// I.i.d. standard normal streamfunction coefficients for `n >= 1`.
    pub fn random(trunc: usize, rng: &mut impl Rng) -> Self {
        let mut psi = SpectralScalar::zeros(trunc);
        for c in &mut psi.coeffs_mut()[1..] {
            *c = rng.sample(StandardNormal);
        }
        Self { psi }
    }

    pub fn trunc(&self) -> usize {
        self.psi.trunc()
    }

    pub fn streamfunction(&self) -> &SpectralScalar {
        &self.psi
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { psi: self.psi.scaled(s) }
    }

    pub fn map_degree(&self, f: impl Fn(usize) -> f64) -> Self {
        Self::from_streamfunction(self.psi.map_degree(f))
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        self.psi.axpy(s, &other.psi);
    }

    /// `‖u‖²_{L²} = Σ Λ c²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.psi.weighted_norm_sq(eigenvalue)
    }

    /// `‖rot u‖²_{L²} = Σ Λ² c²`.
    pub fn rot_norm_sq(&self) -> f64 {
        self.psi.weighted_norm_sq(|n| eigenvalue(n).powi(2))
    }

    /// Velocity samples `∇⊥ψ` on a grid.
    pub fn velocity(&self, grid: &Grid) -> Result<VectorSamples> {
        grid.perp_synthesis(&self.psi)
    }
}

fn inverse_eigenvalue(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.0 / eigenvalue(n)
    }
}

fn check_zero_mean(spectrum: &SpectralScalar) -> Result<()> {
    let mean = spectrum.mean_coeff();
    if mean.abs() > 1e-12 * (1.0 + spectrum.norm_sq().sqrt()) {
        Err(Error::NonzeroMean(mean))
    } else {
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(alpha)
    } else {
        Err(Error::InvalidParameter { name: "alpha", value: alpha })
    }
}

/// Scalar `rot u = div(u⊥)`; coefficients `Λ_n c[n][k]`.
pub fn rot_scalar(field: &DivFreeField) -> SpectralScalar {
    field.psi.map_degree(eigenvalue)
}

/// `(1 − αΔ)^{-1}` applied coefficient-wise.
pub fn helmholtz_invert(spectrum: &SpectralScalar, alpha: f64) -> Result<SpectralScalar> {
    let alpha = check_alpha(alpha)?;
    Ok(spectrum.map_degree(|n| 1.0 / (1.0 + alpha * eigenvalue(n))))
}

/// `(1 − αΔ)` applied coefficient-wise.
pub fn helmholtz_apply(spectrum: &SpectralScalar, alpha: f64) -> Result<SpectralScalar> {
    let alpha = check_alpha(alpha)?;
    Ok(spectrum.map_degree(|n| 1.0 + alpha * eigenvalue(n)))
}

/// `‖ū‖²_α = ‖ū‖² + α‖rot ū‖² = Σ Λ(1 + αΛ) c²`.
pub fn alpha_norm_sq(field: &DivFreeField, alpha: f64) -> Result<f64> {
    let alpha = check_alpha(alpha)?;
    Ok(field.psi.weighted_norm_sq(|n| alpha_weight(n, alpha)))
}

/// `(θ, ξ)_α = (θ, ξ) + α(rot θ, rot ξ)`.
pub fn alpha_inner(a: &DivFreeField, b: &DivFreeField, alpha: f64) -> f64 {
    a.psi.weighted_dot(&b.psi, |n| alpha_weight(n, alpha))
}

#[inline]
pub(crate) fn alpha_weight(n: usize, alpha: f64) -> f64 {
    let l = eigenvalue(n);
    l * (1.0 + alpha * l)
}

/// `‖ω̄‖²_α = ‖ω̄‖² + α‖∇ω̄‖² = Σ (1 + αΛ) a²`, for zero-mean `ω̄`.
pub fn enstrophy_alpha_norm_sq(omega_bar: &SpectralScalar, alpha: f64) -> Result<f64> {
    let alpha = check_alpha(alpha)?;
    check_zero_mean(omega_bar)?;
    Ok(omega_bar.weighted_norm_sq(|n| if n == 0 { 0.0 } else { 1.0 + alpha * eigenvalue(n) }))
}

/// Vector Laplacian `Δu = ∇ div u − rot rot u`; on `∇⊥ψ` it is `∇⊥Δψ`.
pub fn vector_laplacian(field: &DivFreeField) -> DivFreeField {
    field.map_degree(|n| -eigenvalue(n))
}

/// Pointwise `(∇_a c) · b` for tangent samples `a`, `b` and the
/// divergence-free field `c = ∇⊥ψ` given by the covariant Hessian of `ψ`.
pub fn covariant_contract(a: &VectorSamples, b: &VectorSamples, hess: &HessianSamples) -> Vec<f64> {
    (0..a.len())
        .map(|q| {
            let (at, ap) = (a.theta[q], a.phi[q]);
            let (tt, tp, pp) = (hess.tt[q], hess.tp[q], hess.pp[q]);
            b.theta[q] * (at * tp + ap * pp) - b.phi[q] * (at * tt + ap * tp)
        })
        .collect()
}

/// Pointwise squared Frobenius norm of the symmetric part of `∇(∇⊥ψ)`.
pub fn strain_norm_sq(hess: &HessianSamples) -> Vec<f64> {
    (0..hess.tt.len()).map(|q| 2.0 * hess.tp[q].powi(2) + 0.5 * (hess.pp[q] - hess.tt[q]).powi(2)).collect()
}
