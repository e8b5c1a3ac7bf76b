//! Closed-form a priori bounds: the attractor-dimension estimate and the
//! dissipative energy, enstrophy and time-averaged vorticity bounds.
//!
//! Everything here is evaluated from spectral norms, never by quadrature.

use crate::error::{positive, Result};
use crate::fields::{alpha_norm_sq, enstrophy_alpha_norm_sq, DivFreeField};
use crate::sht::SpectralScalar;
use std::f64::consts::PI;

/// Where the flow lives. Only the whole sphere is simulated; the subdomain
/// branch is a formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Sphere,
    Subdomain,
}

/// Upper bound on the attractor dimension for forcing `g`.
pub fn dimension_bound(alpha: f64, gamma: f64, g: &DivFreeField, domain: Domain) -> Result<f64> {
    dimension_bound_from_norms(alpha, gamma, g.l2_norm_sq(), g.rot_norm_sq(), domain)
}

/// Same bound from `‖g‖²` and `‖rot g‖²` directly.
pub fn dimension_bound_from_norms(
    alpha: f64,
    gamma: f64,
    g_norm_sq: f64,
    rot_g_norm_sq: f64,
    domain: Domain,
) -> Result<f64> {
    let alpha = positive("alpha", alpha)?;
    let gamma = positive("gamma", gamma)?;
    let energy_branch = g_norm_sq / (2.0 * alpha);
    let scale = 1.0 / (8.0 * PI * alpha * gamma.powi(4));
    Ok(match domain {
        Domain::Sphere => scale * rot_g_norm_sq.min(energy_branch),
        Domain::Subdomain => scale * energy_branch,
    })
}

/// Coefficient `C` in `q(n) <= −γn + C√n`.
fn trace_growth(alpha: f64, gamma: f64, g: &DivFreeField, domain: Domain) -> Result<f64> {
    let alpha = positive("alpha", alpha)?;
    let gamma = positive("gamma", gamma)?;
    let g_branch = g.l2_norm_sq().sqrt() / (2.0 * alpha).sqrt();
    let avg_rot = match domain {
        Domain::Sphere => g.rot_norm_sq().sqrt().min(g_branch),
        Domain::Subdomain => g_branch,
    } / gamma;
    Ok(avg_rot / (2.0 * (2.0 * PI * alpha).sqrt()))
}

/// The analytic upper estimate `−γn + C√n` for the Lyapunov trace sum of
/// `n` directions; its positive root is the dimension bound.
pub fn lyapunov_sum_bound(n: usize, alpha: f64, gamma: f64, g: &DivFreeField, domain: Domain) -> Result<f64> {
    let c = trace_growth(alpha, gamma, g, domain)?;
    let n = n as f64;
    Ok(-gamma * n + c * n.sqrt())
}

/// `t ↦ ‖ū(0)‖²_α e^{−γt} + ‖g‖²/γ²`.
pub fn energy_bound(alpha: f64, gamma: f64, g: &DivFreeField, u0: &DivFreeField) -> Result<impl Fn(f64) -> f64> {
    let gamma = positive("gamma", gamma)?;
    let e0 = alpha_norm_sq(u0, positive("alpha", alpha)?)?;
    let floor = g.l2_norm_sq() / (gamma * gamma);
    Ok(move |t: f64| e0 * (-gamma * t).exp() + floor)
}

/// `t ↦ ‖ω̄(0)‖²_α e^{−γt} + ‖rot g‖²/γ²`, with `omega0` the initial `ω̄`.
pub fn enstrophy_bound(
    alpha: f64,
    gamma: f64,
    g: &DivFreeField,
    omega0: &SpectralScalar,
) -> Result<impl Fn(f64) -> f64> {
    let gamma = positive("gamma", gamma)?;
    let z0 = enstrophy_alpha_norm_sq(omega0, positive("alpha", alpha)?)?;
    let floor = g.rot_norm_sq() / (gamma * gamma);
    Ok(move |t: f64| z0 * (-gamma * t).exp() + floor)
}

/// `(1/t)∫₀ᵗ e^{−γs/2} ds`, equal to 1 at `t = 0`.
fn decay_average(gamma: f64, t: f64) -> f64 {
    let x = 0.5 * gamma * t;
    if x < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// Finite-time bound on `(1/t)∫₀ᵗ ‖rot ū‖ ds` from the enstrophy estimate:
/// `‖rot g‖/γ + ‖ω̄(0)‖_α · (1/t)∫₀ᵗ e^{−γs/2} ds`.
///
/// As `t → ∞` it tends to `‖rot g‖/γ`.
pub fn time_avg_rot_bound_enstrophy(
    alpha: f64,
    gamma: f64,
    g: &DivFreeField,
    omega0: &SpectralScalar,
) -> Result<impl Fn(f64) -> f64> {
    let gamma = positive("gamma", gamma)?;
    let z0 = enstrophy_alpha_norm_sq(omega0, positive("alpha", alpha)?)?.sqrt();
    let limit = g.rot_norm_sq().sqrt() / gamma;
    Ok(move |t: f64| limit + z0 * decay_average(gamma, t))
}

/// Finite-time bound on `(1/t)∫₀ᵗ ‖rot ū‖ ds` from the energy estimate.
///
/// The smaller of two valid forms: the integrated energy balance with
/// Hölder, `(‖g‖²/(2αγ²) + ‖ū(0)‖²_α/(2αγt))^{1/2}`, and the pointwise
/// energy bound averaged, `α^{-1/2}(‖ū(0)‖_α (1/t)∫e^{−γs/2} + ‖g‖/γ)`.
/// As `t → ∞` it tends to `‖g‖/(γ√(2α))`.
pub fn time_avg_rot_bound_energy(
    alpha: f64,
    gamma: f64,
    g: &DivFreeField,
    u0: &DivFreeField,
) -> Result<impl Fn(f64) -> f64> {
    let alpha = positive("alpha", alpha)?;
    let gamma = positive("gamma", gamma)?;
    let e0 = alpha_norm_sq(u0, alpha)?;
    let g_sq = g.l2_norm_sq();
    Ok(move |t: f64| {
        let pointwise = (e0.sqrt() * decay_average(gamma, t) + g_sq.sqrt() / gamma) / alpha.sqrt();
        if t > 0.0 {
            let integrated = (g_sq / (2.0 * alpha * gamma * gamma) + e0 / (2.0 * alpha * gamma * t)).sqrt();
            pointwise.min(integrated)
        } else {
            pointwise
        }
    })
}
