//! Tangent-linear propagation and Lyapunov-exponent sums in the α-inner
//! product `(θ, ξ)_α = (θ, ξ) + α(rot θ, rot ξ)`.
//!
//! Tangents are stepped together with the base state (same Runge–Kutta
//! stages) and re-orthonormalized periodically by modified Gram–Schmidt in
//! the α-inner product. The logarithms of the diagonal factors, averaged
//! over time, give the exponents. The sums `λ_1 + … + λ_k` estimate the trace
//! numbers `q(k)` for one trajectory and one family; they are a lower proxy
//! for the supremum over all families.

use crate::dynamics::{filtered_velocity, initial_vorticity, overflow_as_blow_up, vorticity_of, Model, SimConfig};
use crate::error::{Error, Result};
use crate::fields::{alpha_inner, covariant_contract, DivFreeField};
use crate::sht::{Grid, SpectralScalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Diagonal factors at or below this are treated as a rank deficiency.
pub const RANK_TOLERANCE: f64 = 1e-14;

/// Orthonormal tangent family with accumulated growth logarithms.
#[derive(Debug, Clone)]
pub struct TangentBundle {
    pub thetas: Vec<DivFreeField>,
    /// Steps between re-orthonormalizations.
    pub ortho_every: usize,
    /// `Σ log r_jj` per direction since the last reset.
    pub log_sums: Vec<f64>,
}

impl TangentBundle {
    /// Random family, α-orthonormalized.
    pub fn random(trunc: usize, n: usize, alpha: f64, ortho_every: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("need at least one tangent vector".into()));
        }
        let dim = crate::sht::mode_count(trunc) - 1;
        if n > dim {
            return Err(Error::Config(format!("{n} tangent vectors exceed the phase-space dimension {dim}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<DivFreeField> = (0..n).map(|_| DivFreeField::random(trunc, &mut rng)).collect();
        let (thetas, _) = alpha_qr(&raw, alpha)?;
        Ok(Self { thetas, ortho_every: ortho_every.max(1), log_sums: vec![0.0; n] })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Re-orthonormalizes and adds the log diagonal factors.
    pub fn reorthonormalize(&mut self, alpha: f64) -> Result<Vec<f64>> {
        let (q, r) = alpha_qr(&self.thetas, alpha)?;
        for (s, d) in self.log_sums.iter_mut().zip(&r) {
            *s += d.ln();
        }
        self.thetas = q;
        Ok(r)
    }
}

/// Modified Gram–Schmidt with one re-orthogonalization pass in the
/// α-inner product. Returns the orthonormal family and the positive
/// diagonal factors `r_jj`.
pub fn alpha_qr(thetas: &[DivFreeField], alpha: f64) -> Result<(Vec<DivFreeField>, Vec<f64>)> {
    let mut q: Vec<DivFreeField> = Vec::with_capacity(thetas.len());
    let mut diag = Vec::with_capacity(thetas.len());
    for (index, v) in thetas.iter().enumerate() {
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &q {
                let c = alpha_inner(&w, e, alpha);
                w.axpy(-c, e);
            }
        }
        let factor = alpha_inner(&w, &w, alpha).sqrt();
        if factor.is_nan() || factor <= RANK_TOLERANCE {
            return Err(Error::RankDeficient { index, factor });
        }
        q.push(w.scaled(1.0 / factor));
        diag.push(factor);
    }
    Ok((q, diag))
}

/// Gram matrix `(θ_i, θ_j)_α`.
pub fn alpha_gram(thetas: &[DivFreeField], alpha: f64) -> Vec<Vec<f64>> {
    thetas.iter().map(|a| thetas.iter().map(|b| alpha_inner(a, b, alpha)).collect()).collect()
}

/// `∂_t θ̄ = L θ̄` for the filtered tangent velocity `θ̄` about the base
/// vorticity `base_omega`.
pub fn linearized_rhs(theta: &DivFreeField, base_omega: &SpectralScalar, model: &Model) -> Result<DivFreeField> {
    let alpha = model.alpha();
    let d = model.linearized_rhs(base_omega, &vorticity_of(theta, alpha))?;
    Ok(filtered_velocity(&d, alpha))
}

/// Settings for [`q_estimate`].
#[derive(Debug, Clone)]
pub struct LyapunovConfig {
    pub n: usize,
    /// Discarded transient; `None` means `10/γ`.
    pub t_transient: Option<f64>,
    pub t_avg: f64,
    pub ortho_every: usize,
    /// Number of equal averaging windows used for the convergence flag.
    pub windows: usize,
    /// Largest allowed change of any cumulative sum between the last two
    /// windows before the estimate is flagged as unconverged.
    pub window_tolerance: f64,
    pub tangent_seed: u64,
}

impl LyapunovConfig {
    pub fn new(n: usize, t_avg: f64) -> Self {
        Self { n, t_transient: None, t_avg, ortho_every: 10, windows: 4, window_tolerance: 0.1, tangent_seed: 0x5eed }
    }
}

/// Outcome of a Benettin run.
#[derive(Debug, Clone)]
pub struct LyapunovEstimate {
    /// Exponents sorted in decreasing order.
    pub exponents: Vec<f64>,
    /// `λ_1 + … + λ_k`, `k = 1..=n`.
    pub cumulative: Vec<f64>,
    /// Cumulative sums over each averaging window, with the window end time.
    pub windows: Vec<(f64, Vec<f64>)>,
    pub converged: bool,
    /// Smallest `k` with a negative cumulative sum, if any.
    pub n_star: Option<usize>,
    /// Smallest `bound − trace` over the pointwise trace checks made at
    /// each re-orthonormalization; nonnegative when the estimate held.
    pub trace_margin: f64,
}

fn cumulative_sorted(mut exps: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    exps.sort_by(|a, b| b.total_cmp(a));
    let cum = exps
        .iter()
        .scan(0.0, |s, x| {
            *s += x;
            Some(*s)
        })
        .collect();
    (exps, cum)
}

/// Benettin estimate of the cumulative exponent sums along the trajectory
/// started from the seeded initial state of `cfg`.
pub fn q_estimate(cfg: &SimConfig, lcfg: &LyapunovConfig) -> Result<LyapunovEstimate> {
    let omega0 = initial_vorticity(cfg.trunc, cfg.params.alpha, cfg.initial_energy, cfg.seed);
    q_estimate_from(cfg, &omega0, lcfg)
}

/// As [`q_estimate`] from an explicit initial vorticity.
pub fn q_estimate_from(cfg: &SimConfig, omega0: &SpectralScalar, lcfg: &LyapunovConfig) -> Result<LyapunovEstimate> {
    let model = Model::new(cfg)?;
    let alpha = cfg.params.alpha;
    let gamma = cfg.params.gamma;
    if lcfg.n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if !(lcfg.t_avg.is_finite() && lcfg.t_avg > 0.0) {
        return Err(Error::InvalidParameter { name: "t_avg", value: lcfg.t_avg });
    }
    let windows = lcfg.windows.max(1);
    let t_transient = lcfg.t_transient.unwrap_or(10.0 / gamma);
    let dt = cfg.dt;

    let mut omega = omega0.clone();
    for step in 0..(t_transient / dt).round() as usize {
        omega = overflow_as_blow_up(model.step(&omega, dt), step + 1, (step + 1) as f64 * dt)?;
        if !omega.is_finite() {
            return Err(Error::BlowUp { step: step + 1, t: (step + 1) as f64 * dt });
        }
    }

    let mut bundle = TangentBundle::random(cfg.trunc, lcfg.n, alpha, lcfg.ortho_every, lcfg.tangent_seed)?;
    let quartic = Grid::quartic(cfg.trunc)?;
    let per_window = ((lcfg.t_avg / dt / windows as f64).round() as usize).max(1);
    let per_window = per_window.div_ceil(bundle.ortho_every) * bundle.ortho_every;
    let mut window_sums = Vec::with_capacity(windows);
    let mut total = vec![0.0; lcfg.n];
    let mut trace_margin = f64::INFINITY;
    let mut step = 0;
    for w in 0..windows {
        bundle.log_sums.iter_mut().for_each(|s| *s = 0.0);
        for _ in 0..per_window / bundle.ortho_every {
            let check = trace_check(&model, &omega, &bundle.thetas, &quartic)?;
            trace_margin = trace_margin.min(check.bound - check.spectral);
            let mut tangents: Vec<SpectralScalar> = bundle.thetas.iter().map(|t| vorticity_of(t, alpha)).collect();
            for _ in 0..bundle.ortho_every {
                step += 1;
                let t_now = t_transient + step as f64 * dt;
                let (next, tn) = overflow_as_blow_up(model.step_with_tangents(&omega, &tangents, dt), step, t_now)?;
                if !next.is_finite() || tn.iter().any(|t| !t.is_finite()) {
                    return Err(Error::BlowUp { step, t: t_transient + step as f64 * dt });
                }
                omega = next;
                tangents = tn;
            }
            bundle.thetas = tangents.iter().map(|t| filtered_velocity(t, alpha)).collect();
            bundle.reorthonormalize(alpha)?;
        }
        let span = per_window as f64 * dt;
        for (t, s) in total.iter_mut().zip(&bundle.log_sums) {
            *t += s;
        }
        let (_, cum) = cumulative_sorted(bundle.log_sums.iter().map(|s| s / span).collect());
        window_sums.push((t_transient + (w + 1) as f64 * span, cum));
    }
    let span = (windows * per_window) as f64 * dt;
    let (exponents, cumulative) = cumulative_sorted(total.iter().map(|s| s / span).collect());
    let converged = match window_sums.len() {
        0 | 1 => true,
        k => {
            window_sums[k - 1].1.iter().zip(&window_sums[k - 2].1).all(|(a, b)| (a - b).abs() <= lcfg.window_tolerance)
        }
    };
    let n_star = cumulative.iter().position(|&c| c < 0.0).map(|i| i + 1);
    Ok(LyapunovEstimate { exponents, cumulative, windows: window_sums, converged, n_star, trace_margin })
}

/// The trace `Σ_j (L θ_j, θ_j)_α` by two routes, and its analytic bound.
#[derive(Debug, Clone, Copy)]
pub struct TraceCheck {
    /// Spectral route: `Σ_j Σ c_θj · (dω_θj/dt)`.
    pub spectral: f64,
    /// Quadrature route: `−γ Σ‖θ_j‖²_α − Σ_j ∫ (∇_θj ū · θ_j) dS`.
    pub quadrature: f64,
    /// `−γ Σ‖θ_j‖²_α + 2^{-1/2} ‖rot ū‖ ‖ρ‖`, `ρ = Σ|θ_j|²`.
    pub bound: f64,
}

/// Evaluates the instantaneous trace of the linearization on a family of
/// tangents (ideally α-orthonormal) about `base_omega`.
pub fn trace_check(
    model: &Model,
    base_omega: &SpectralScalar,
    thetas: &[DivFreeField],
    quartic: &Grid,
) -> Result<TraceCheck> {
    let alpha = model.alpha();
    let gamma = model.gamma();
    quartic.require_exact(4 * model.trunc(), "trace check needs quartic products")?;
    let base = model.samples(base_omega)?;
    let u = filtered_velocity(base_omega, alpha);
    let hess = quartic.hessian_synthesis(u.streamfunction())?;
    let mut spectral = 0.0;
    let mut quad = 0.0;
    let mut norms = 0.0;
    let mut rho = vec![0.0; quartic.len()];
    for t in thetas {
        let w = vorticity_of(t, alpha);
        let mut d = model.linearized_advection(&base, &w)?;
        d.axpy(-gamma, &w);
        spectral += t.streamfunction().dot(&d);
        let n = alpha_inner(t, t, alpha);
        norms += n;
        let v = t.velocity(quartic)?;
        quad -= quartic.integrate(&covariant_contract(&v, &v, &hess));
        for (r, s) in rho.iter_mut().zip(v.norm_sq()) {
            *r += s;
        }
    }
    quad -= gamma * norms;
    let bound = -gamma * norms + std::f64::consts::FRAC_1_SQRT_2 * u.rot_norm_sq().sqrt() * quartic.l2_norm(&rho);
    Ok(TraceCheck { spectral, quadrature: quad, bound })
}

/// Slack `2^{-1/2}‖ρ‖‖rot u‖ − Σ_j ∫ (∇_{v_j} u · v_j) dS`, `ρ = Σ|v_j|²`,
/// on a grid that integrates quartic products exactly.
pub fn stretching_inequality_check_on(grid: &Grid, u: &DivFreeField, vs: &[DivFreeField]) -> Result<f64> {
    let trunc = vs.iter().map(DivFreeField::trunc).chain([u.trunc()]).max().unwrap_or(1);
    if grid.trunc() < trunc {
        return Err(Error::TruncationExceedsGrid { trunc, capacity: grid.trunc() });
    }
    grid.require_exact(4 * trunc, "quartic products need a doubled grid")?;
    let hess = grid.hessian_synthesis(u.streamfunction())?;
    let mut lhs = 0.0;
    let mut rho = vec![0.0; grid.len()];
    for v in vs {
        let s = v.velocity(grid)?;
        lhs += grid.integrate(&covariant_contract(&s, &s, &hess));
        for (r, x) in rho.iter_mut().zip(s.norm_sq()) {
            *r += x;
        }
    }
    let rhs = std::f64::consts::FRAC_1_SQRT_2 * grid.l2_norm(&rho) * u.rot_norm_sq().sqrt();
    Ok(rhs - lhs)
}

/// [`stretching_inequality_check_on`] with a quartic grid built for the inputs.
pub fn stretching_inequality_check(u: &DivFreeField, vs: &[DivFreeField]) -> Result<f64> {
    let trunc = vs.iter().map(DivFreeField::trunc).chain([u.trunc()]).max().unwrap_or(1);
    stretching_inequality_check_on(&Grid::quartic(trunc)?, u, vs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::AlphaParams;
    use crate::sht::eigenvalue;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn cfg(alpha: f64, gamma: f64, trunc: usize) -> SimConfig {
        SimConfig::new(AlphaParams::new(alpha, gamma).unwrap(), trunc)
    }

    fn identity_gap(g: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    #[test]
    fn qr_of_orthonormal_set_is_identity() {
        let alpha = 0.3;
        let basis: Vec<DivFreeField> = [(1, 1), (2, 4), (3, 7)]
            .iter()
            .map(|&(n, k)| {
                let l = eigenvalue(n);
                DivFreeField::basis(5, n, k).scaled(1.0 / (1.0 + alpha * l).sqrt())
            })
            .collect();
        let (q, r) = alpha_qr(&basis, alpha).unwrap();
        assert!(r.iter().all(|d| (d - 1.0).abs() < 1e-12));
        for (a, b) in q.iter().zip(&basis) {
            assert!(a.streamfunction().max_abs_diff(b.streamfunction()) < 1e-12);
        }
    }

    #[test]
    fn qr_reports_scale_and_rank_deficiency() {
        let alpha = 0.1;
        let mut v = DivFreeField::random(4, &mut rng(1));
        let n = alpha_inner(&v, &v, alpha).sqrt();
        v = v.scaled(7.0 / n);
        let (_, r) = alpha_qr(&[v.clone()], alpha).unwrap();
        assert!((r[0] - 7.0).abs() < 1e-12);
        let err = alpha_qr(&[v.clone(), v.scaled(2.0)], alpha).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { index: 1, .. }));
    }

    #[test]
    fn qr_of_random_family_is_orthonormal() {
        let alpha = 0.05;
        let mut r = rng(2);
        let raw: Vec<DivFreeField> = (0..5).map(|_| DivFreeField::random(6, &mut r)).collect();
        let (q, d) = alpha_qr(&raw, alpha).unwrap();
        assert!(identity_gap(&alpha_gram(&q, alpha)) < 1e-10);
        assert!(d.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn linearization_about_rest_is_pure_decay() {
        let c = cfg(0.1, 0.8, 6);
        let model = Model::new(&c).unwrap();
        let theta = DivFreeField::random(6, &mut rng(3));
        let d = linearized_rhs(&theta, &SpectralScalar::zeros(6), &model).unwrap();
        assert!(d.streamfunction().max_abs_diff(&theta.scaled(-0.8).streamfunction().clone()) < 1e-13);
    }

    #[test]
    fn linearization_matches_directional_difference() {
        let mut c = cfg(0.1, 1.0, 8);
        c.forcing = DivFreeField::basis(8, 3, 2);
        let model = Model::new(&c).unwrap();
        let base = initial_vorticity(8, 0.1, 2.0, 4);
        let theta = DivFreeField::random(8, &mut rng(5));
        let w = vorticity_of(&theta, 0.1);
        let eps = 1e-5;
        let mut plus = base.clone();
        plus.axpy(eps, &w);
        let mut minus = base.clone();
        minus.axpy(-eps, &w);
        let mut fd = model.rhs(&plus).unwrap();
        fd.axpy(-1.0, &model.rhs(&minus).unwrap());
        let fd = fd.scaled(0.5 / eps);
        let lin = model.linearized_rhs(&base, &w).unwrap();
        let mut diff = fd.clone();
        diff.axpy(-1.0, &lin);
        assert!(diff.norm_sq().sqrt() < 1e-6 * lin.norm_sq().sqrt());
    }

    #[test]
    fn transport_by_base_is_alpha_orthogonal() {
        // (B(ū, θ), θ)_α reduces to ∫ (∇_ū θ · θ) dS, which vanishes
        let alpha = 0.2;
        let grid = Grid::quartic(7).unwrap();
        let u = filtered_velocity(&initial_vorticity(7, alpha, 1.5, 6), alpha);
        let theta = DivFreeField::random(7, &mut rng(7));
        let us = u.velocity(&grid).unwrap();
        let ts = theta.velocity(&grid).unwrap();
        let h = grid.hessian_synthesis(theta.streamfunction()).unwrap();
        let v = grid.integrate(&covariant_contract(&us, &ts, &h));
        assert!(v.abs() < 1e-10 * alpha_inner(&theta, &theta, alpha), "{v}");
    }

    #[test]
    fn trace_routes_agree_and_respect_bound() {
        let c = cfg(0.1, 0.7, 6);
        let model = Model::new(&c).unwrap();
        let quartic = Grid::quartic(6).unwrap();
        for seed in 0..3 {
            let base = initial_vorticity(6, 0.1, 3.0, seed);
            let b = TangentBundle::random(6, 4, 0.1, 1, 100 + seed).unwrap();
            let tc = trace_check(&model, &base, &b.thetas, &quartic).unwrap();
            assert!((tc.spectral - tc.quadrature).abs() < 1e-9 * tc.spectral.abs().max(1.0), "{tc:?}");
            assert!(tc.spectral <= tc.bound + 1e-10, "{tc:?}");
        }
    }

    #[test]
    fn decoupled_sums_are_exactly_linear_in_k() {
        let mut c = cfg(0.1, 0.5, 6);
        c.nonlinear = false;
        c.forcing = DivFreeField::basis(6, 2, 1);
        c.dt = 0.02;
        let mut l = LyapunovConfig::new(5, 4.0);
        l.t_transient = Some(1.0);
        let est = q_estimate(&c, &l).unwrap();
        for (k, s) in est.cumulative.iter().enumerate() {
            assert!((s + 0.5 * (k + 1) as f64).abs() < 1e-8, "{s}");
        }
        assert!(est.converged);
        assert_eq!(est.n_star, Some(1));
    }

    #[test]
    fn exponents_are_sorted_and_sums_nonincreasing_past_zero() {
        let mut c = cfg(0.05, 0.5, 6);
        c.forcing = DivFreeField::basis(6, 3, 2).scaled(4.0);
        c.dt = 0.02;
        let mut l = LyapunovConfig::new(4, 4.0);
        l.t_transient = Some(2.0);
        let est = q_estimate(&c, &l).unwrap();
        assert!(est.exponents.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(est.windows.len(), 4);
        assert!(est.trace_margin >= -1e-10);
    }

    #[test]
    fn weak_steady_state_has_exponents_near_minus_gamma() {
        let amp = 1e-4;
        let mut c = cfg(0.1, 1.0, 5);
        c.forcing = DivFreeField::basis(5, 2, 1).scaled(amp * eigenvalue(2).sqrt());
        c.dt = 0.05;
        let steady = vorticity_of(&c.forcing, 0.0);
        let mut l = LyapunovConfig::new(3, 5.0);
        l.t_transient = Some(0.0);
        let est = q_estimate_from(&c, &steady, &l).unwrap();
        for e in &est.exponents {
            assert!((e + 1.0).abs() < 1e-3, "{e}");
        }
    }

    #[test]
    fn stretching_trivial_and_random() {
        let u = DivFreeField::zeros(5);
        let v = DivFreeField::random(5, &mut rng(8));
        assert!(stretching_inequality_check(&u, std::slice::from_ref(&v)).unwrap().abs() < 1e-12);
        let mut r = rng(9);
        for _ in 0..10 {
            let u = DivFreeField::random(5, &mut r);
            let vs: Vec<DivFreeField> = (0..3).map(|_| DivFreeField::random(5, &mut r)).collect();
            assert!(stretching_inequality_check(&u, &vs).unwrap() >= -1e-10);
        }
        assert!(stretching_inequality_check_on(&crate::sht::build_grid(5, true).unwrap(), &u, &[v]).is_err());
    }

    #[test]
    fn bundle_rejects_bad_sizes() {
        assert!(TangentBundle::random(2, 0, 0.1, 1, 0).is_err());
        assert!(TangentBundle::random(2, 9, 0.1, 1, 0).is_err());
        assert!(TangentBundle::random(2, 8, 0.1, 1, 0).is_ok());
    }
}
