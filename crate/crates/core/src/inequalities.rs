//! Certification of the collective Sobolev inequalities on the sphere and
//! of the series inequality they rest on.
//!
//! * [`eval_f`] encloses `F(m) = m² Σ_{n≥1} (2n+1)/(m² + n(n+1))²`, which
//!   must stay below 1 for every `m > 0`.
//! * [`eval_r`] encloses the trapezoid remainder sum
//!   `R(m) = (1/m) Σ_{n≥1} (n/m)³ / ((1 + n(n−1)/m²)² (1 + n(n+1)/m²)²)`,
//!   tied to `F` by the exact identity `m²(1 − F(m)) = 1 − 4R(m)`.
//! * [`lieb_family_check`] draws random orthonormal families and compares
//!   `‖Σ|v_j|²‖_{L²}` with `(1/(2√π)) m^{-1} n^{1/2}`.
//! * [`alt_trace_check`] spot-checks `Tr(BA²B)^p ≤ Tr(B^p A^{2p} B^p)`.
//!
//! Tail bounds come from integral comparison with monotone integrands, so
//! the enclosures are rigorous up to floating-point rounding.

use crate::error::{positive, Error, Result};
use crate::fields::DivFreeField;
use crate::sht::{eigenvalue, mode_count, Grid, SpectralScalar};
use nalgebra::DMatrix;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{PI, SQRT_2};

/// Enclosure `[value, value + tail_bound]` of a positive series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEval {
    pub m: f64,
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

impl SeriesEval {
    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

const MAX_TERMS: usize = 1 << 26;

fn check_tol(rel_tol: f64) -> Result<f64> {
    if rel_tol.is_finite() && rel_tol > 0.0 {
        Ok(rel_tol)
    } else {
        Err(Error::InvalidParameter { name: "rel_tol", value: rel_tol })
    }
}

fn f_term(m2: f64, n: f64) -> f64 {
    let d = m2 + n * (n + 1.0);
    (2.0 * n + 1.0) / (d * d)
}

/// Certified enclosure of `F(m)` whose width is at most `rel_tol` times
/// its lower end.
///
/// Beyond `N` the summand `(2x+1)/(m² + x(x+1))²` decreases once
/// `3N² + 3N + 1 > m²`, and its antiderivative is `−1/(m² + x(x+1))`, so
/// the tail lies between `1/(m² + (N+1)(N+2))` and `1/(m² + N(N+1))`.
pub fn eval_f(m: f64, rel_tol: f64) -> Result<SeriesEval> {
    let m = positive("m", m)?;
    let rel_tol = check_tol(rel_tol)?;
    let m2 = m * m;
    let mut n_terms = 16usize;
    while 3.0 * (n_terms as f64).powi(2) + 3.0 * n_terms as f64 + 1.0 <= m2 {
        n_terms *= 2;
    }
    let mut acc = Neumaier::default();
    let mut done = 0usize;
    loop {
        for n in (done + 1)..=n_terms {
            acc.add(f_term(m2, n as f64));
        }
        done = n_terms;
        let nf = n_terms as f64;
        let lower = 1.0 / (m2 + (nf + 1.0) * (nf + 2.0));
        let upper = 1.0 / (m2 + nf * (nf + 1.0));
        let value = m2 * (acc.value() + lower);
        let width = m2 * (upper - lower);
        if width <= rel_tol * value || n_terms >= MAX_TERMS {
            return Ok(SeriesEval { m, value, tail_bound: width, terms_used: n_terms });
        }
        n_terms *= 2;
    }
}

/// Summand of `R(m)` before the `1/m` prefactor.
fn r_term(m: f64, n: f64) -> f64 {
    let m2 = m * m;
    let x = n / m;
    let a = 1.0 + n * (n - 1.0) / m2;
    let b = 1.0 + n * (n + 1.0) / m2;
    x * x * x / (a * a * b * b)
}

/// Certified enclosure of `R(m)` for `m >= √2`.
///
/// The summand is at most `m⁵/(n(n²−1)²) <= m⁵/(n−1)⁵`, so the tail after
/// `N` terms is below `m⁴/(4(N−1)⁴)`.
pub fn eval_r(m: f64, rel_tol: f64) -> Result<SeriesEval> {
    if !(m.is_finite() && m >= SQRT_2) {
        return Err(Error::OutsideProofRange { m, min: SQRT_2 });
    }
    let rel_tol = check_tol(rel_tol)?;
    let mut n_terms = 64usize;
    let mut acc = Neumaier::default();
    let mut done = 0usize;
    loop {
        for n in (done + 1)..=n_terms {
            acc.add(r_term(m, n as f64));
        }
        done = n_terms;
        let value = acc.value() / m;
        let tail = m.powi(4) / (4.0 * (n_terms as f64 - 1.0).powi(4));
        if tail <= rel_tol * value || n_terms >= MAX_TERMS {
            return Ok(SeriesEval { m, value, tail_bound: tail, terms_used: n_terms });
        }
        n_terms *= 2;
    }
}

/// `f(t) = 1/(1+t)²`.
fn f(t: f64) -> f64 {
    1.0 / ((1.0 + t) * (1.0 + t))
}

/// Node `a_n = (n−1)n/m²`.
fn node(n: usize, m2: f64) -> f64 {
    let n = n as f64;
    (n - 1.0) * n / m2
}

/// `∫_{a_1}^{a_2} f − ½ f(a_2)(a_2 − a_1)`, from the definitions.
pub fn first_trapezoid_gap(m: f64) -> f64 {
    let a2 = node(2, m * m);
    a2 / (1.0 + a2) - 0.5 * f(a2) * a2
}

/// Closed form `(m² + 4)/(m² + 2)²` of [`first_trapezoid_gap`].
pub fn first_trapezoid_gap_closed(m: f64) -> f64 {
    let m2 = m * m;
    (m2 + 4.0) / ((m2 + 2.0) * (m2 + 2.0))
}

/// Residual of the trapezoid regrouping of `F(m)` over the first `n_terms`
/// degrees: the partial sum `(1/m²) Σ_{n≤N} (2n+1) f(n(n+1)/m²)` against
/// `½f(a₂)(a₂−a₁) + Σ_{2≤n≤N} ½(f(aₙ)+f(aₙ₊₁))(aₙ₊₁−aₙ)` plus the
/// boundary term `(N+1) f(a_{N+1})/m²` that the regrouping leaves over.
pub fn trapezoid_identity_check(m: f64, n_terms: usize) -> Result<f64> {
    let m = positive("m", m)?;
    if n_terms < 2 {
        return Err(Error::Config("trapezoid check needs at least two terms".into()));
    }
    let m2 = m * m;
    let mut direct = Neumaier::default();
    let mut regrouped = Neumaier::default();
    regrouped.add(0.5 * f(node(2, m2)) * (node(2, m2) - node(1, m2)));
    for n in 1..=n_terms {
        let nf = n as f64;
        direct.add((2.0 * nf + 1.0) * f(nf * (nf + 1.0) / m2) / m2);
        if n >= 2 {
            let (a, b) = (node(n, m2), node(n + 1, m2));
            regrouped.add(0.5 * (f(a) + f(b)) * (b - a));
        }
    }
    regrouped.add((n_terms as f64 + 1.0) * f(node(n_terms + 1, m2)) / m2);
    Ok((direct.value() - regrouped.value()).abs())
}

/// Exact rational constants of the remainder bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemainderConstants {
    /// `x₀²` where `g(x) = x³/(1+x²)⁴` peaks.
    pub peak_sq: Ratio<i64>,
    /// `x₀ g(x₀)`.
    pub peak_rectangle: Ratio<i64>,
    /// `∫_{x₀}^∞ g`.
    pub tail_integral: Ratio<i64>,
    /// `x₀ g(x₀) + ∫_{x₀}^∞ g`, bounding `(1/m) Σ g(n/m)`.
    pub riemann_bound: Ratio<i64>,
    /// `√k = 1 − max_n n²/(2+n²)²`.
    pub sqrt_k: Ratio<i64>,
    /// `(1/k) · riemann_bound`, the final bound on `R(m)`.
    pub remainder_bound: Ratio<i64>,
}

/// Derives the constants in exact arithmetic.
pub fn remainder_constants() -> RemainderConstants {
    let r = |a: i64, b: i64| Ratio::new(a, b);
    let one = r(1, 1);
    // g'(x) ∝ x²(3 − 5x²): the peak is at x² = 3/5
    let peak_sq = r(3, 5);
    let u0 = one + peak_sq;
    // x g(x) = x⁴/(1+x²)⁴
    let peak_rectangle = peak_sq * peak_sq / (u0 * u0 * u0 * u0);
    // with u = 1 + x²: ∫ x³/(1+x²)⁴ dx = ½∫ (u−1)/u⁴ du = ½(1/(2u²) − 1/(3u³))
    let tail_integral = r(1, 2) * (one / (r(2, 1) * u0 * u0) - one / (r(3, 1) * u0 * u0 * u0));
    let riemann_bound = peak_rectangle + tail_integral;
    let max_ratio = (1..=16).map(|n: i64| r(n * n, (2 + n * n) * (2 + n * n))).max().expect("nonempty range");
    let sqrt_k = one - max_ratio;
    let remainder_bound = riemann_bound / (sqrt_k * sqrt_k);
    RemainderConstants { peak_sq, peak_rectangle, tail_integral, riemann_bound, sqrt_k, remainder_bound }
}

/// Which collective inequality a random family is tested against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    /// Divergence-free fields orthonormal in `m²(v,w) + (rot v, rot w)`.
    Vector { m: f64 },
    /// Zero-mean scalars orthonormal in `m²(φ,ψ) + (∇φ, ∇ψ)`.
    Scalar { m: f64 },
    /// Divergence-free fields orthonormal in `(v,w) + α(rot v, rot w)`.
    Alpha { alpha: f64 },
}

impl FamilyKind {
    /// Diagonal weight of the inner product on degree-`n` coefficients.
    fn weight(&self, n: usize) -> f64 {
        let l = eigenvalue(n);
        match *self {
            FamilyKind::Vector { m } => m * m * l + l * l,
            FamilyKind::Scalar { m } => m * m + l,
            FamilyKind::Alpha { alpha } => l + alpha * l * l,
        }
    }

    /// Right-hand side for a family of `n` members.
    pub fn bound(&self, n: usize) -> f64 {
        let c = 1.0 / (2.0 * PI.sqrt());
        let n = n as f64;
        match *self {
            FamilyKind::Vector { m } | FamilyKind::Scalar { m } => c * n.sqrt() / m,
            FamilyKind::Alpha { alpha } => c * (n / alpha).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            FamilyKind::Vector { m } | FamilyKind::Scalar { m } => positive("m", m).map(|_| ()),
            FamilyKind::Alpha { alpha } => positive("alpha", alpha).map(|_| ()),
        }
    }
}

/// Outcome of one randomized family draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiebCheck {
    pub n: usize,
    pub rho_norm: f64,
    pub bound: f64,
    pub slack: f64,
}

/// Gram–Schmidt (two passes) in a diagonal spectral inner product.
fn weighted_gram_schmidt(
    family: Vec<SpectralScalar>,
    weight: impl Fn(usize) -> f64 + Copy,
) -> Option<Vec<SpectralScalar>> {
    let mut out: Vec<SpectralScalar> = Vec::with_capacity(family.len());
    for mut v in family {
        for _ in 0..2 {
            for e in &out {
                let c = v.weighted_dot(e, weight);
                v.axpy(-c, e);
            }
        }
        let norm = v.weighted_norm_sq(weight).sqrt();
        if norm.is_nan() || norm <= 1e-10 {
            return None;
        }
        out.push(v.scaled(1.0 / norm));
    }
    Some(out)
}

/// Draws `n` i.i.d. normal spectra (zero mean) and orthonormalizes them.
fn random_family(kind: FamilyKind, n: usize, trunc: usize, rng: &mut ChaCha8Rng) -> Option<Vec<SpectralScalar>> {
    let family = (0..n)
        .map(|_| {
            let mut s = SpectralScalar::zeros(trunc);
            for c in &mut s.coeffs_mut()[1..] {
                *c = rng.sample(StandardNormal);
            }
            s
        })
        .collect();
    weighted_gram_schmidt(family, |d| if d == 0 { 0.0 } else { kind.weight(d) })
}

/// `‖Σ_j |v_j|²‖_{L²}` on `grid` for an orthonormal family of spectra,
/// interpreted as streamfunctions (vector kinds) or as the scalars.
pub fn family_density_norm(kind: FamilyKind, family: &[SpectralScalar], grid: &Grid) -> Result<f64> {
    let mut rho = vec![0.0; grid.len()];
    for s in family {
        match kind {
            FamilyKind::Scalar { .. } => {
                for (r, v) in rho.iter_mut().zip(grid.synthesis(s)?) {
                    *r += v * v;
                }
            }
            _ => {
                for (r, v) in rho.iter_mut().zip(grid.perp_synthesis(s)?.norm_sq()) {
                    *r += v;
                }
            }
        }
    }
    Ok(grid.l2_norm(&rho))
}

/// One randomized certification of the collective inequality on a
/// quartic-capable `grid`.
pub fn lieb_family_check_on(grid: &Grid, kind: FamilyKind, n: usize, trunc: usize, seed: u64) -> Result<LiebCheck> {
    kind.validate()?;
    let dim = mode_count(trunc) - 1;
    if n == 0 || n > dim {
        return Err(Error::Config(format!("family size {n} must lie in 1..={dim}")));
    }
    if grid.trunc() < trunc {
        return Err(Error::TruncationExceedsGrid { trunc, capacity: grid.trunc() });
    }
    grid.require_exact(4 * trunc, "density norm needs quartic products")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // a rank-deficient draw has probability zero; redraw if it happens
    let family = loop {
        if let Some(f) = random_family(kind, n, trunc, &mut rng) {
            break f;
        }
    };
    let rho_norm = family_density_norm(kind, &family, grid)?;
    let bound = kind.bound(n);
    Ok(LiebCheck { n, rho_norm, bound, slack: bound - rho_norm })
}

/// [`lieb_family_check_on`] with a freshly built quartic grid.
pub fn lieb_family_check(kind: FamilyKind, n: usize, trunc: usize, seed: u64) -> Result<LiebCheck> {
    lieb_family_check_on(&Grid::quartic(trunc)?, kind, n, trunc, seed)
}

/// Converts an α-orthonormal divergence-free family into the equivalent
/// family for `m = α^{-1/2}`: `v ↦ α^{1/2} v`.
pub fn alpha_family_to_m(family: &[DivFreeField], alpha: f64) -> Vec<DivFreeField> {
    family.iter().map(|v| v.scaled(alpha.sqrt())).collect()
}

fn random_psd(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    &g * g.transpose()
}

fn mat_pow(m: &DMatrix<f64>, p: u32) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..p {
        out = &out * m;
    }
    out
}

/// `Tr(B^p A^{2p} B^p) − Tr((B A² B)^p)` by dense products.
pub fn trace_gap(a: &DMatrix<f64>, b: &DMatrix<f64>, p: u32) -> f64 {
    let a2 = a * a;
    let left = mat_pow(&(b * &a2 * b), p).trace();
    let bp = mat_pow(b, p);
    let right = (&bp * mat_pow(&a2, p) * &bp).trace();
    right - left
}

/// Trace inequality on random symmetric positive semidefinite `A`, `B`,
/// returned relative to the size of the traces.
pub fn alt_trace_check(p: u32, dim: usize, seed: u64) -> Result<f64> {
    if !(1..=2).contains(&p) {
        return Err(Error::Config(format!("power p = {p} must be 1 or 2")));
    }
    if !(1..=8).contains(&dim) {
        return Err(Error::Config(format!("dimension {dim} must lie in 1..=8")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_psd(dim, &mut rng);
    let b = random_psd(dim, &mut rng);
    let scale = mat_pow(&(&b * &a * &a * &b), p).trace().abs().max(1.0);
    Ok(trace_gap(&a, &b, p) / scale)
}

/// `count` points spaced evenly in `log m` over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
        }
    }
}
