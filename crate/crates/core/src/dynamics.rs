//! Time integration of the damped, driven Euler–Bardina system on the sphere.
//!
//! Taking `rot` of the momentum equation `∂_t u + ∇_ū ū + γu + ∇p = g`
//! removes the pressure and the gradient part of
//! `∇_ū ū = ∇(|ū|²/2) − ū⊥ rot ū`. Since `(v⊥)⊥ = −v` and `div ū = 0`,
//! `rot(−ū⊥ ω̄) = div(ū ω̄) = ū·∇ω̄`, so the prognostic scalar
//! `ω = rot u = (1 − αΔ)ω̄` obeys
//!
//! ```text
//! ∂_t ω + ū·∇ω̄ + γω = rot g,   ω̄ = (1 − αΔ)^{-1} ω,   ū = ∇⊥Δ^{-1}(−ω̄).
//! ```
//!
//! The state is the spectrum of `ω` with the degree-0 coefficient held at
//! zero. The advection term is formed on a 3/2-rule grid; the damping is
//! integrated exactly inside a fourth-order Runge–Kutta step.

use crate::bounds::{energy_bound, enstrophy_bound, time_avg_rot_bound_energy, time_avg_rot_bound_enstrophy};
use crate::error::{Error, Result};
use crate::fields::{alpha_norm_sq, enstrophy_alpha_norm_sq, rot_scalar, AlphaParams, DivFreeField};
use crate::sht::{build_grid, eigenvalue, Grid, SpectralScalar, VectorSamples};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Relative slack below which a diagnostic bound counts as violated.
pub const SLACK_TOLERANCE: f64 = -1e-8;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: AlphaParams,
    pub trunc: usize,
    /// Time-independent forcing `g`.
    pub forcing: DivFreeField,
    pub dt: f64,
    pub t_end: f64,
    /// Emit a diagnostics record every this many steps (and at the end).
    pub record_every: usize,
    pub seed: u64,
    /// `‖ū(0)‖²_α` of the random initial state.
    pub initial_energy: f64,
    /// With `false` the advection term is dropped: pure damping plus forcing.
    pub nonlinear: bool,
}

impl SimConfig {
    pub fn new(params: AlphaParams, trunc: usize) -> Self {
        Self {
            params,
            trunc,
            forcing: DivFreeField::zeros(trunc),
            dt: 1e-2,
            t_end: 1.0,
            record_every: 10,
            seed: 0,
            initial_energy: 1.0,
            nonlinear: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trunc < 1 {
            return Err(Error::InvalidTruncation { trunc: self.trunc, min: 1 });
        }
        AlphaParams::new(self.params.alpha, self.params.gamma)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter { name: "dt", value: self.dt });
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(Error::InvalidParameter { name: "t_end", value: self.t_end });
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if !(self.initial_energy.is_finite() && self.initial_energy >= 0.0) {
            return Err(Error::InvalidParameter { name: "initial_energy", value: self.initial_energy });
        }
        if self.forcing.trunc() > self.trunc {
            return Err(Error::TruncationExceedsGrid { trunc: self.forcing.trunc(), capacity: self.trunc });
        }
        if !self.forcing.streamfunction().is_finite() {
            return Err(Error::Config("forcing has non-finite coefficients".into()));
        }
        Ok(())
    }

    /// Number of steps; `t_end` is rounded to a whole number of steps.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    /// Forcing padded to the run truncation.
    pub fn forcing_padded(&self) -> DivFreeField {
        DivFreeField::from_streamfunction(self.forcing.streamfunction().with_trunc(self.trunc))
    }
}

/// One line of the diagnostics stream. Slacks are relative,
/// `(bound − value)/bound`, and nonnegative when a bound holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy_alpha: f64,
    pub enstrophy_alpha: f64,
    pub rot_u_l2: f64,
    pub running_time_avg_rot: f64,
    pub slack_energy: f64,
    pub slack_enstrophy: f64,
    pub slack_time_avg_g: f64,
    pub slack_time_avg_rot_g: f64,
}

impl DiagnosticsRecord {
    pub fn slacks(&self) -> [f64; 4] {
        [self.slack_energy, self.slack_enstrophy, self.slack_time_avg_g, self.slack_time_avg_rot_g]
    }

    pub fn min_slack(&self) -> f64 {
        self.slacks().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        [self.t, self.energy_alpha, self.enstrophy_alpha, self.rot_u_l2, self.running_time_avg_rot]
            .iter()
            .chain(self.slacks().iter())
            .all(|v| v.is_finite())
    }
}

fn relative_slack(bound: f64, value: f64) -> f64 {
    if bound > 0.0 {
        (bound - value) / bound
    } else if value <= 0.0 {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

/// `ω ↦ ω̄ = (1 − αΔ)^{-1}ω`.
pub fn smooth(omega: &SpectralScalar, alpha: f64) -> SpectralScalar {
    omega.map_degree(|n| 1.0 / (1.0 + alpha * eigenvalue(n)))
}

/// The filtered velocity `ū` of a vorticity state `ω`.
pub fn filtered_velocity(omega: &SpectralScalar, alpha: f64) -> DivFreeField {
    let psi = omega.map_degree(|n| if n == 0 { 0.0 } else { 1.0 / (eigenvalue(n) * (1.0 + alpha * eigenvalue(n))) });
    DivFreeField::from_streamfunction(psi)
}

/// Vorticity `ω = (1 − αΔ) rot ū` of a filtered velocity.
pub fn vorticity_of(field: &DivFreeField, alpha: f64) -> SpectralScalar {
    field.streamfunction().map_degree(|n| eigenvalue(n) * (1.0 + alpha * eigenvalue(n)))
}

/// Grid samples of `ū = ∇⊥ψ̄` and `∇ω̄` for one smoothed vorticity.
#[derive(Debug, Clone)]
pub struct FlowSamples {
    pub velocity: VectorSamples,
    pub grad_vorticity: VectorSamples,
}

impl FlowSamples {
    /// From `ω̄` (zero mean) on `grid`.
    pub fn new(omega_bar: &SpectralScalar, grid: &Grid) -> Result<Self> {
        let psi = omega_bar.map_degree(|n| if n == 0 { 0.0 } else { 1.0 / eigenvalue(n) });
        Ok(Self { velocity: grid.perp_synthesis(&psi)?, grad_vorticity: grid.grad_synthesis(omega_bar)? })
    }
}

/// Spectrum of `a.velocity · ∇(b.vorticity)`, truncated to `trunc`, mean removed.
fn advect(a: &VectorSamples, b: &VectorSamples, grid: &Grid, trunc: usize) -> Result<SpectralScalar> {
    let mut out = grid.analysis(&a.dot(b))?.with_trunc(trunc);
    out.coeffs_mut()[0] = 0.0;
    Ok(out)
}

fn check_mean(omega: &SpectralScalar) -> Result<()> {
    let mean = omega.mean_coeff();
    if mean != 0.0 {
        return Err(Error::NonzeroMean(mean));
    }
    Ok(())
}

/// Spectrum of `ū·∇ω̄` with `ū = ∇⊥Δ^{-1}(−ω̄)`, computed pseudospectrally.
///
/// The grid must integrate degree-`3N` products exactly.
pub fn nonlinear_term(omega_bar: &SpectralScalar, grid: &Grid) -> Result<SpectralScalar> {
    check_mean(omega_bar)?;
    let trunc = omega_bar.trunc();
    if grid.trunc() < trunc {
        return Err(Error::TruncationExceedsGrid { trunc, capacity: grid.trunc() });
    }
    grid.require_exact(3 * trunc, "advection products need degree-3N exact quadrature")?;
    let s = FlowSamples::new(omega_bar, grid)?;
    advect(&s.velocity, &s.grad_vorticity, grid, trunc)
}

/// Precomputed grid and forcing for one parameter set.
#[derive(Debug, Clone)]
pub struct Model {
    alpha: f64,
    gamma: f64,
    trunc: usize,
    grid: Grid,
    rot_forcing: SpectralScalar,
    nonlinear: bool,
}

impl Model {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            alpha: cfg.params.alpha,
            gamma: cfg.params.gamma,
            trunc: cfg.trunc,
            grid: build_grid(cfg.trunc, true)?,
            rot_forcing: rot_scalar(&cfg.forcing_padded()),
            nonlinear: cfg.nonlinear,
        })
    }

    /// Undamped, unforced model (`γ = 0`, `g = 0`), for conservation checks.
    pub fn inviscid(alpha: f64, trunc: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter { name: "alpha", value: alpha });
        }
        if trunc < 1 {
            return Err(Error::InvalidTruncation { trunc, min: 1 });
        }
        Ok(Self {
            alpha,
            gamma: 0.0,
            trunc,
            grid: build_grid(trunc, true)?,
            rot_forcing: SpectralScalar::zeros(trunc),
            nonlinear: true,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check_state(&self, omega: &SpectralScalar) -> Result<()> {
        if omega.trunc() != self.trunc {
            return Err(Error::DimensionMismatch { expected: self.trunc, got: omega.trunc() });
        }
        check_mean(omega)
    }

    pub fn samples(&self, omega: &SpectralScalar) -> Result<FlowSamples> {
        FlowSamples::new(&smooth(omega, self.alpha), &self.grid)
    }

    /// `−ū·∇ω̄ + rot g`: everything except the damping.
    pub fn forcing_and_advection(&self, omega: &SpectralScalar) -> Result<SpectralScalar> {
        self.check_state(omega)?;
        let mut out = self.rot_forcing.clone();
        if self.nonlinear {
            let s = self.samples(omega)?;
            out.axpy(-1.0, &advect(&s.velocity, &s.grad_vorticity, &self.grid, self.trunc)?);
        }
        Ok(out)
    }

    /// `dω/dt = −ū·∇ω̄ − γω + rot g`.
    pub fn rhs(&self, omega: &SpectralScalar) -> Result<SpectralScalar> {
        let mut out = self.forcing_and_advection(omega)?;
        out.axpy(-self.gamma, omega);
        Ok(out)
    }

    /// Linearization of the advection about `base`, acting on a tangent
    /// vorticity: `−ū·∇ω̄_θ − ū_θ·∇ω̄`.
    pub fn linearized_advection(&self, base: &FlowSamples, tangent: &SpectralScalar) -> Result<SpectralScalar> {
        self.check_state(tangent)?;
        if !self.nonlinear {
            return Ok(SpectralScalar::zeros(self.trunc));
        }
        let t = self.samples(tangent)?;
        let mut sum = base.velocity.dot(&t.grad_vorticity);
        for (s, v) in sum.iter_mut().zip(t.velocity.dot(&base.grad_vorticity)) {
            *s += v;
        }
        let mut out = self.grid.analysis(&sum)?.with_trunc(self.trunc);
        out.coeffs_mut()[0] = 0.0;
        Ok(out.scaled(-1.0))
    }

    /// Full tangent derivative `∂_t ω_θ`, including damping.
    pub fn linearized_rhs(&self, base_omega: &SpectralScalar, tangent: &SpectralScalar) -> Result<SpectralScalar> {
        self.check_state(base_omega)?;
        let base = self.samples(base_omega)?;
        let mut out = self.linearized_advection(&base, tangent)?;
        out.axpy(-self.gamma, tangent);
        Ok(out)
    }

    /// One integrating-factor RK4 step of the state alone.
    pub fn step(&self, omega: &SpectralScalar, dt: f64) -> Result<SpectralScalar> {
        let mut out =
            if_rk4(std::slice::from_ref(omega), dt, self.gamma, |x| Ok(vec![self.forcing_and_advection(&x[0])?]))?;
        Ok(out.swap_remove(0))
    }

    /// One step of the state and its tangents as a single coupled system.
    pub fn step_with_tangents(
        &self,
        omega: &SpectralScalar,
        tangents: &[SpectralScalar],
        dt: f64,
    ) -> Result<(SpectralScalar, Vec<SpectralScalar>)> {
        let mut state = Vec::with_capacity(tangents.len() + 1);
        state.push(omega.clone());
        state.extend_from_slice(tangents);
        let mut out = if_rk4(&state, dt, self.gamma, |x| {
            let mut d = Vec::with_capacity(x.len());
            d.push(self.forcing_and_advection(&x[0])?);
            if self.nonlinear {
                let base = self.samples(&x[0])?;
                for t in &x[1..] {
                    d.push(self.linearized_advection(&base, t)?);
                }
            } else {
                d.extend(x[1..].iter().map(|_| SpectralScalar::zeros(self.trunc)));
            }
            Ok(d)
        })?;
        let base = out.remove(0);
        Ok((base, out))
    }
}

/// Non-finite grid samples inside a step mean the state overflowed.
pub(crate) fn overflow_as_blow_up<T>(r: Result<T>, step: usize, t: f64) -> Result<T> {
    match r {
        Err(Error::InvalidParameter { name: "sample", .. }) => Err(Error::BlowUp { step, t }),
        other => other,
    }
}

fn combine(a: f64, x: &[SpectralScalar], b: f64, y: &[SpectralScalar]) -> Vec<SpectralScalar> {
    x.iter()
        .zip(y)
        .map(|(x, y)| {
            let mut r = x.scaled(a);
            r.axpy(b, y);
            r
        })
        .collect()
}

/// Lawson RK4 for `x' = −γx + f(x)`: classical RK4 applied to `e^{γt}x`.
fn if_rk4(
    x: &[SpectralScalar],
    dt: f64,
    gamma: f64,
    f: impl Fn(&[SpectralScalar]) -> Result<Vec<SpectralScalar>>,
) -> Result<Vec<SpectralScalar>> {
    let e = (-0.5 * gamma * dt).exp();
    let e2 = e * e;
    let h = 0.5 * dt;
    let k1 = f(x)?;
    let k2 = f(&combine(e, x, e * h, &k1))?;
    let k3 = f(&combine(e, x, h, &k2))?;
    let k4 = f(&combine(e2, x, dt * e, &k3))?;
    let mut out = combine(e2, x, dt / 6.0 * e2, &k1);
    for i in 0..out.len() {
        out[i].axpy(dt / 3.0 * e, &k2[i]);
        out[i].axpy(dt / 3.0 * e, &k3[i]);
        out[i].axpy(dt / 6.0, &k4[i]);
    }
    Ok(out)
}

/// Random initial vorticity: streamfunction coefficients `N(0,1)/Λ_n`,
/// rescaled so that `‖ū‖²_α = energy`.
pub fn initial_vorticity(trunc: usize, alpha: f64, energy: f64, seed: u64) -> SpectralScalar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi = SpectralScalar::zeros(trunc);
    for (i, c) in psi.coeffs_mut().iter_mut().enumerate().skip(1) {
        let n = crate::sht::degree_of(i);
        let z: f64 = rng.sample(StandardNormal);
        *c = z / eigenvalue(n);
    }
    let field = DivFreeField::from_streamfunction(psi);
    let e = alpha_norm_sq(&field, alpha).unwrap_or(0.0);
    let scale = if e > 0.0 { (energy / e).sqrt() } else { 0.0 };
    vorticity_of(&field.scaled(scale), alpha)
}

/// Integrator with diagnostics bookkeeping.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimConfig,
    model: Model,
    omega: SpectralScalar,
    step: usize,
    start_step: usize,
    rot_integral: f64,
    last_rot: f64,
    bounds: InitialBounds,
}

#[derive(Debug, Clone)]
struct InitialBounds {
    alpha: f64,
    gamma: f64,
    forcing: DivFreeField,
    u0: DivFreeField,
    omega_bar0: SpectralScalar,
}

impl InitialBounds {
    fn at(&self, t: f64) -> [f64; 4] {
        let (a, g) = (self.alpha, self.gamma);
        let f = &self.forcing;
        // each constructor only fails on invalid α, γ, which were validated
        [
            energy_bound(a, g, f, &self.u0).map(|b| b(t)),
            enstrophy_bound(a, g, f, &self.omega_bar0).map(|b| b(t)),
            time_avg_rot_bound_energy(a, g, f, &self.u0).map(|b| b(t)),
            time_avg_rot_bound_enstrophy(a, g, f, &self.omega_bar0).map(|b| b(t)),
        ]
        .map(|r| r.unwrap_or(f64::NAN))
    }
}

impl Simulation {
    /// Starts from the seeded random initial state.
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let omega = initial_vorticity(cfg.trunc, cfg.params.alpha, cfg.initial_energy, cfg.seed);
        Self::with_initial(cfg, omega)
    }

    pub fn with_initial(cfg: SimConfig, omega: SpectralScalar) -> Result<Self> {
        Self::resume(cfg, omega, 0)
    }

    /// Continues from `omega` as if `step` steps had already been taken;
    /// diagnostics bounds are measured from the resumed state.
    pub fn resume(cfg: SimConfig, omega: SpectralScalar, step: usize) -> Result<Self> {
        let model = Model::new(&cfg)?;
        model.check_state(&omega)?;
        if !omega.is_finite() {
            return Err(Error::BlowUp { step, t: step as f64 * cfg.dt });
        }
        let alpha = cfg.params.alpha;
        let u0 = filtered_velocity(&omega, alpha);
        let rot0 = u0.rot_norm_sq().sqrt();
        let bounds = InitialBounds {
            alpha,
            gamma: cfg.params.gamma,
            forcing: cfg.forcing_padded(),
            omega_bar0: smooth(&omega, alpha),
            u0,
        };
        Ok(Self { cfg, model, omega, step, start_step: step, rot_integral: 0.0, last_rot: rot0, bounds })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn omega(&self) -> &SpectralScalar {
        &self.omega
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    /// Filtered velocity `ū` of the current state.
    pub fn velocity(&self) -> DivFreeField {
        filtered_velocity(&self.omega, self.cfg.params.alpha)
    }

    pub fn advance(&mut self) -> Result<()> {
        let t = (self.step + 1) as f64 * self.cfg.dt;
        let next = overflow_as_blow_up(self.model.step(&self.omega, self.cfg.dt), self.step + 1, t)?;
        self.accept(next)
    }

    fn accept(&mut self, next: SpectralScalar) -> Result<()> {
        self.step += 1;
        if !next.is_finite() {
            return Err(Error::BlowUp { step: self.step, t: self.time() });
        }
        self.omega = next;
        let rot = self.velocity().rot_norm_sq().sqrt();
        self.rot_integral += 0.5 * self.cfg.dt * (self.last_rot + rot);
        self.last_rot = rot;
        Ok(())
    }

    /// Diagnostics at the current time; bounds are measured from the
    /// state the simulation started (or resumed) from.
    pub fn record(&self) -> DiagnosticsRecord {
        let alpha = self.cfg.params.alpha;
        let u = self.velocity();
        let omega_bar = smooth(&self.omega, alpha);
        let energy = alpha_norm_sq(&u, alpha).unwrap_or(f64::NAN);
        let enstrophy = enstrophy_alpha_norm_sq(&omega_bar, alpha).unwrap_or(f64::NAN);
        let rot = u.rot_norm_sq().sqrt();
        let local_t = (self.step - self.start_step) as f64 * self.cfg.dt;
        let avg = if local_t > 0.0 { self.rot_integral / local_t } else { rot };
        let [be, bz, bg, brg] = self.bounds.at(local_t);
        DiagnosticsRecord {
            t: self.time(),
            energy_alpha: energy,
            enstrophy_alpha: enstrophy,
            rot_u_l2: rot,
            running_time_avg_rot: avg,
            slack_energy: relative_slack(be, energy),
            slack_enstrophy: relative_slack(bz, enstrophy),
            slack_time_avg_g: relative_slack(bg, avg),
            slack_time_avg_rot_g: relative_slack(brg, avg),
        }
    }

    /// Runs to `t_end`, passing every due record to `sink`.
    pub fn run(&mut self, mut sink: impl FnMut(&DiagnosticsRecord) -> Result<()>) -> Result<()> {
        let total = self.cfg.steps();
        sink(&self.record())?;
        while self.step < total {
            self.advance()?;
            if self.step.is_multiple_of(self.cfg.record_every) || self.step == total {
                sink(&self.record())?;
            }
        }
        Ok(())
    }
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub final_omega: SpectralScalar,
    pub final_time: f64,
}

impl Trajectory {
    pub fn min_slack(&self) -> f64 {
        self.records.iter().map(DiagnosticsRecord::min_slack).fold(f64::INFINITY, f64::min)
    }
}

/// Integrates `cfg` from its seeded initial state to `t_end`.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    let mut sim = Simulation::new(cfg.clone())?;
    let mut records = Vec::new();
    sim.run(|r| {
        records.push(*r);
        Ok(())
    })?;
    Ok(Trajectory { records, final_time: sim.time(), final_omega: sim.omega })
}

/// Free-standing `rhs` for one-off evaluations; builds a [`Model`].
pub fn rhs(omega: &SpectralScalar, cfg: &SimConfig) -> Result<SpectralScalar> {
    Model::new(cfg)?.rhs(omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sht::{index, mode_count};
    use std::f64::consts::PI;

    fn params(alpha: f64, gamma: f64) -> AlphaParams {
        AlphaParams::new(alpha, gamma).unwrap()
    }

    /// Degree ≤ 2 real harmonics as polynomials in `(x, y, z)`, with their
    /// ambient gradients. Independent of the Legendre recurrence.
    fn cartesian(n: usize, k: usize, p: [f64; 3]) -> (f64, [f64; 3]) {
        let [x, y, z] = p;
        let c1 = (3.0 / (4.0 * PI)).sqrt();
        let c20 = (5.0 / (16.0 * PI)).sqrt();
        let c21 = (15.0 / (4.0 * PI)).sqrt();
        let c22 = (15.0 / (16.0 * PI)).sqrt();
        match (n, k) {
            (1, 1) => (c1 * z, [0.0, 0.0, c1]),
            (1, 2) => (c1 * x, [c1, 0.0, 0.0]),
            (1, 3) => (c1 * y, [0.0, c1, 0.0]),
            (2, 1) => (c20 * (3.0 * z * z - 1.0), [0.0, 0.0, 6.0 * c20 * z]),
            (2, 2) => (c21 * x * z, [c21 * z, 0.0, c21 * x]),
            (2, 3) => (c21 * y * z, [0.0, c21 * z, c21 * y]),
            (2, 4) => (c22 * (x * x - y * y), [2.0 * c22 * x, -2.0 * c22 * y, 0.0]),
            (2, 5) => (c21 * x * y, [c21 * y, c21 * x, 0.0]),
            _ => unreachable!(),
        }
    }

    fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    }

    /// `ū·∇ω̄ = r̂ · (∇ω̄ × ∇ψ̄)` pointwise, with `ū = ∇ψ̄ × r̂`.
    fn cartesian_advection(modes: &[(usize, usize, f64)], theta: f64, phi: f64) -> f64 {
        let r = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let mut gw = [0.0; 3];
        let mut gp = [0.0; 3];
        for &(n, k, a) in modes {
            let (_, g) = cartesian(n, k, r);
            for i in 0..3 {
                gw[i] += a * g[i];
                gp[i] += a / eigenvalue(n) * g[i];
            }
        }
        let c = cross(gw, gp);
        r.iter().zip(c).map(|(r, c)| r * c).sum()
    }

    fn spec_of(trunc: usize, modes: &[(usize, usize, f64)]) -> SpectralScalar {
        let mut s = SpectralScalar::zeros(trunc);
        for &(n, k, a) in modes {
            s.set(n, k, a);
        }
        s
    }

    fn random_zero_mean(trunc: usize, seed: u64, scale: f64) -> SpectralScalar {
        initial_vorticity(trunc, 0.1, scale, seed)
    }

    #[test]
    fn single_harmonic_has_no_advection() {
        let trunc = 6;
        let grid = build_grid(trunc, true).unwrap();
        for (n, k) in [(1, 1), (2, 3), (4, 6), (6, 13)] {
            let w = SpectralScalar::single(trunc, n, k);
            let j = nonlinear_term(&w, &grid).unwrap();
            assert!(j.coeffs().iter().all(|c| c.abs() < 1e-13), "({n}, {k})");
        }
    }

    #[test]
    fn advection_matches_cartesian_oracle() {
        let trunc = 4;
        let grid = build_grid(trunc, true).unwrap();
        let fine = build_grid(3 * trunc, false).unwrap();
        for modes in [
            vec![(1, 1, 1.0), (2, 1, 1.0)],
            vec![(1, 2, 1.0), (2, 2, 0.7), (2, 1, -0.4), (2, 5, 0.3)],
            vec![(1, 3, -0.5), (2, 4, 1.1), (1, 1, 0.25)],
        ] {
            let w = spec_of(trunc, &modes);
            let s = FlowSamples::new(&w, &fine).unwrap();
            let pointwise = s.velocity.dot(&s.grad_vorticity);
            for (q, (t, p)) in fine.nodes().enumerate() {
                let oracle = cartesian_advection(&modes, t, p);
                assert!((pointwise[q] - oracle).abs() < 1e-10, "{} vs {oracle}", pointwise[q]);
            }
            // spectral output, synthesized, against the oracle projected by
            // an independent fine quadrature
            let spectral = nonlinear_term(&w, &grid).unwrap();
            let oracle_vals: Vec<f64> = fine.nodes().map(|(t, p)| cartesian_advection(&modes, t, p)).collect();
            let projected = fine.analysis(&oracle_vals).unwrap().with_trunc(trunc);
            assert!(spectral.max_abs_diff(&projected) < 1e-10);
        }
    }

    #[test]
    fn advection_is_orthogonal_to_vorticity_and_streamfunction() {
        let trunc = 12;
        let grid = build_grid(trunc, true).unwrap();
        for seed in 0..4 {
            let w = random_zero_mean(trunc, seed, 3.0);
            let j = nonlinear_term(&w, &grid).unwrap();
            let psi = w.map_degree(|n| if n == 0 { 0.0 } else { 1.0 / eigenvalue(n) });
            let scale = j.norm_sq().sqrt() * w.norm_sq().sqrt();
            assert!(j.dot(&w).abs() < 1e-12 * scale.max(1.0));
            assert!(j.dot(&psi).abs() < 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn nonlinear_term_rejects_small_grid_and_mean() {
        let w = SpectralScalar::single(8, 3, 2);
        assert!(matches!(nonlinear_term(&w, &build_grid(8, false).unwrap()), Err(Error::GridTooSmall { .. })));
        let mut m = w.clone();
        m.set(0, 1, 1.0);
        assert!(matches!(nonlinear_term(&m, &build_grid(8, true).unwrap()), Err(Error::NonzeroMean(_))));
    }

    #[test]
    fn rhs_trivial_cases() {
        let mut cfg = SimConfig::new(params(0.1, 0.7), 6);
        let w = SpectralScalar::single(6, 3, 4).scaled(2.0);
        let d = rhs(&w, &cfg).unwrap();
        assert!(d.max_abs_diff(&w.scaled(-0.7)) < 1e-13);

        let mut psi = SpectralScalar::zeros(6);
        psi.set(2, 3, 1.5);
        psi.set(5, 1, -0.5);
        cfg.forcing = DivFreeField::from_streamfunction(psi);
        let d = rhs(&SpectralScalar::zeros(6), &cfg).unwrap();
        assert!(d.max_abs_diff(&rot_scalar(&cfg.forcing)) < 1e-15);
    }

    #[test]
    fn state_mean_is_never_touched() {
        let mut cfg = SimConfig::new(params(0.05, 0.5), 8);
        cfg.forcing = DivFreeField::basis(8, 3, 2).scaled(2.0);
        cfg.t_end = 0.5;
        let tr = simulate(&cfg).unwrap();
        assert_eq!(tr.final_omega.mean_coeff(), 0.0);
    }

    #[test]
    fn step_is_fourth_order() {
        let mut cfg = SimConfig::new(params(0.05, 0.8), 8);
        cfg.forcing = DivFreeField::basis(8, 2, 3).scaled(3.0);
        let model = Model::new(&cfg).unwrap();
        let w0 = random_zero_mean(8, 11, 4.0);
        let horizon = 0.4;
        let run = |steps: usize| {
            let dt = horizon / steps as f64;
            let mut w = w0.clone();
            for _ in 0..steps {
                w = model.step(&w, dt).unwrap();
            }
            w
        };
        let (a, b, c) = (run(10), run(20), run(40));
        let ratio = a.max_abs_diff(&b) / b.max_abs_diff(&c);
        assert!((ratio - 16.0).abs() < 2.5, "ratio {ratio}");
    }

    #[test]
    fn one_step_agrees_with_rhs() {
        let mut cfg = SimConfig::new(params(0.1, 1.0), 6);
        cfg.forcing = DivFreeField::basis(6, 3, 3);
        let model = Model::new(&cfg).unwrap();
        let w = random_zero_mean(6, 3, 1.0);
        let f = model.rhs(&w).unwrap();
        for dt in [1e-3, 5e-4] {
            let mut fd = model.step(&w, dt).unwrap();
            fd.axpy(-1.0, &w);
            let fd = fd.scaled(1.0 / dt);
            // one-step difference quotient is first-order accurate
            assert!(fd.max_abs_diff(&f) < 10.0 * dt * (1.0 + f.norm_sq().sqrt()));
        }
    }

    #[test]
    fn unforced_energy_decays_exactly() {
        let gamma = 0.6;
        let mut cfg = SimConfig::new(params(0.2, gamma), 10);
        cfg.t_end = 1.0;
        cfg.dt = 1e-2;
        cfg.seed = 5;
        let tr = simulate(&cfg).unwrap();
        let e0 = tr.records[0].energy_alpha;
        let last = tr.records.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-12);
        let expected = e0 * (-2.0 * gamma * last.t).exp();
        assert!((last.energy_alpha - expected).abs() < 1e-8 * expected);
        for r in &tr.records {
            assert!(r.min_slack() >= SLACK_TOLERANCE, "{r:?}");
        }
    }

    #[test]
    fn inviscid_run_conserves_both_quadratic_invariants() {
        let alpha = 0.1;
        let trunc = 10;
        let model = Model::inviscid(alpha, trunc).unwrap();
        let mut w = random_zero_mean(trunc, 2, 1.0);
        let norms = |w: &SpectralScalar| {
            (
                alpha_norm_sq(&filtered_velocity(w, alpha), alpha).unwrap(),
                enstrophy_alpha_norm_sq(&smooth(w, alpha), alpha).unwrap(),
            )
        };
        let (e0, z0) = norms(&w);
        for _ in 0..200 {
            w = model.step(&w, 5e-3).unwrap();
        }
        let (e1, z1) = norms(&w);
        assert!((e1 - e0).abs() < 1e-10 * e0);
        assert!((z1 - z0).abs() < 1e-10 * z0);
    }

    #[test]
    fn forced_run_respects_bounds_and_is_deterministic() {
        let mut cfg = SimConfig::new(params(0.05, 0.5), 10);
        let mut psi = SpectralScalar::zeros(10);
        psi.set(2, 2, 1.0);
        psi.set(4, 5, 0.5);
        psi.set(6, 1, -0.3);
        cfg.forcing = DivFreeField::from_streamfunction(psi);
        cfg.t_end = 3.0;
        cfg.dt = 0.01;
        cfg.seed = 9;
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert!(a.records.iter().all(DiagnosticsRecord::is_finite));
        assert!(a.min_slack() >= SLACK_TOLERANCE);
        assert!(a.records.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(a.records.len(), 31);
    }

    #[test]
    fn running_average_starts_at_initial_value() {
        let cfg = SimConfig::new(params(0.1, 1.0), 5);
        let sim = Simulation::new(cfg).unwrap();
        let r = sim.record();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.running_time_avg_rot, r.rot_u_l2);
        assert!((r.energy_alpha - 1.0).abs() < 1e-12);
        assert!(r.slack_energy.abs() < 1e-15);
    }

    #[test]
    fn initial_spectrum_shape() {
        let trunc = 20;
        let alpha = 0.1;
        let w = initial_vorticity(trunc, alpha, 2.5, 4);
        let u = filtered_velocity(&w, alpha);
        assert!((alpha_norm_sq(&u, alpha).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(w, initial_vorticity(trunc, alpha, 2.5, 4));
        assert_ne!(w, initial_vorticity(trunc, alpha, 2.5, 5));
        assert_eq!(w.coeffs().len(), mode_count(trunc));
        assert_eq!(w.coeffs()[index(0, 1)], 0.0);
    }

    #[test]
    fn blow_up_is_reported() {
        let cfg = SimConfig::new(params(0.1, 1.0), 4);
        let mut sim = Simulation::new(cfg).unwrap();
        let mut bad = sim.omega().clone();
        bad.coeffs_mut()[3] = f64::NAN;
        assert!(matches!(sim.accept(bad), Err(Error::BlowUp { step: 1, .. })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::new(params(0.1, 1.0), 4);
        cfg.dt = 0.0;
        assert!(cfg.validate().is_err());
        cfg.dt = 0.1;
        cfg.t_end = 0.01;
        assert!(cfg.validate().is_err());
        cfg.t_end = 1.0;
        cfg.forcing = DivFreeField::zeros(6);
        assert!(cfg.validate().is_err());
        cfg.forcing = DivFreeField::zeros(2);
        assert!(cfg.validate().is_ok());
        cfg.trunc = 0;
        assert!(cfg.validate().is_err());
    }
}
