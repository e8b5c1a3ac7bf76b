use super::legendre::{gauss_legendre, legendre_column, lm_count, m_offset};
use super::{cos_index, eigenvalue, fourier_norm, sin_index, SpectralScalar};
use crate::error::{Error, Result};
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Gauss–Legendre colatitude × equispaced longitude grid with precomputed
/// Legendre and Fourier tables up to degree `trunc`.
///
/// Samples are stored latitude-major: `values[j * nlon + i]` is the sample at
/// colatitude node `j` (north to south) and longitude `2π i / nlon`.
#[derive(Debug, Clone)]
pub struct Grid {
    trunc: usize,
    nlat: usize,
    nlon: usize,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    weights: Vec<f64>,
    /// `P̃_n^m(x_j)` at `[j * lm_count + lm]`.
    p: Vec<f64>,
    /// `dP̃_n^m/dθ (x_j)`, same layout.
    dp: Vec<f64>,
    fft: LongitudeFft,
}

/// Real FFT plans along one latitude circle.
#[derive(Clone)]
struct LongitudeFft {
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for LongitudeFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LongitudeFft({})", self.forward.len())
    }
}

impl LongitudeFft {
    fn new(nlon: usize) -> Self {
        let mut planner = RealFftPlanner::new();
        Self { forward: planner.plan_fft_forward(nlon), inverse: planner.plan_fft_inverse(nlon) }
    }
}

/// Tangent-vector samples on a grid, components on `(e_θ, e_φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSamples {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl VectorSamples {
    pub fn zeros(len: usize) -> Self {
        Self { theta: vec![0.0; len], phi: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Pointwise `|v|²`.
    pub fn norm_sq(&self) -> Vec<f64> {
        self.theta.iter().zip(&self.phi).map(|(a, b)| a * a + b * b).collect()
    }

    /// Pointwise `v · w`.
    pub fn dot(&self, other: &Self) -> Vec<f64> {
        (0..self.len()).map(|i| self.theta[i] * other.theta[i] + self.phi[i] * other.phi[i]).collect()
    }

    /// `v⊥ = (v_φ, −v_θ)`.
    pub fn perp(&self) -> Self {
        Self { theta: self.phi.clone(), phi: self.theta.iter().map(|x| -x).collect() }
    }
}

/// Covariant Hessian of a scalar on the orthonormal frame `(e_θ, e_φ)`.
#[derive(Debug, Clone)]
pub struct HessianSamples {
    pub tt: Vec<f64>,
    pub tp: Vec<f64>,
    pub pp: Vec<f64>,
}

/// Builds the transform grid for degree `trunc`.
///
/// Without `dealias` the grid is the smallest one that integrates degree-`2N`
/// products exactly (`nlat = N + 1`, `nlon = 2N + 1`). With `dealias` it
/// follows the 3/2 rule, `nlat = ⌈3(N+1)/2⌉` and `nlon >= 3N + 1`, so that
/// quadratic products are projected back to degree `N` without aliasing;
/// `nlon` is rounded up to a 2·3·5-smooth length for the FFT.
pub fn build_grid(trunc: usize, dealias: bool) -> Result<Grid> {
    if dealias {
        let (nlat, nlon) = dealiased_sizes(trunc);
        Grid::new(trunc, nlat, nlon)
    } else {
        Grid::new(trunc, trunc + 1, 2 * trunc + 1)
    }
}

fn dealiased_sizes(trunc: usize) -> (usize, usize) {
    ((3 * (trunc + 1)).div_ceil(2), smooth_length(3 * trunc + 1))
}

/// Smallest integer `>= n` with no prime factor above 5.
fn smooth_length(n: usize) -> usize {
    (n..)
        .find(|&k| {
            let mut k = k;
            for p in [2, 3, 5] {
                while k % p == 0 {
                    k /= p;
                }
            }
            k == 1
        })
        .expect("smooth numbers are unbounded")
}

impl Grid {
    pub fn new(trunc: usize, nlat: usize, nlon: usize) -> Result<Self> {
        if trunc == 0 {
            return Err(Error::InvalidTruncation { trunc, min: 1 });
        }
        if nlat < trunc + 1 {
            return Err(Error::GridTooSmall { trunc, nlat, nlon, reason: "need nlat >= trunc + 1" });
        }
        if nlon < 2 * trunc + 1 {
            return Err(Error::GridTooSmall { trunc, nlat, nlon, reason: "need nlon >= 2 trunc + 1" });
        }
        let (cos_theta, weights) = gauss_legendre(nlat);
        let sin_theta: Vec<f64> = cos_theta.iter().map(|x| (1.0 - x * x).sqrt()).collect();
        let lmc = lm_count(trunc);
        let mut p = vec![0.0; nlat * lmc];
        let mut dp = vec![0.0; nlat * lmc];
        for j in 0..nlat {
            legendre_column(
                trunc,
                cos_theta[j],
                sin_theta[j],
                &mut p[j * lmc..(j + 1) * lmc],
                &mut dp[j * lmc..(j + 1) * lmc],
            );
        }
        Ok(Self { trunc, nlat, nlon, cos_theta, sin_theta, weights, p, dp, fft: LongitudeFft::new(nlon) })
    }

    /// Grid for quartic products of degree-`trunc` fields: twice the
    /// dealiased sizes in each direction.
    pub fn quartic(trunc: usize) -> Result<Self> {
        let (nlat, nlon) = dealiased_sizes(trunc);
        Self::new(trunc, 2 * nlat, 2 * nlon)
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn nlat(&self) -> usize {
        self.nlat
    }

    pub fn nlon(&self) -> usize {
        self.nlon
    }

    pub fn len(&self) -> usize {
        self.nlat * self.nlon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gauss weights in `x = cos θ`; they sum to 2.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn colatitude(&self, j: usize) -> f64 {
        self.cos_theta[j].acos()
    }

    pub fn longitude(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.nlon as f64
    }

    pub fn sin_theta(&self, j: usize) -> f64 {
        self.sin_theta[j]
    }

    pub fn cos_theta(&self, j: usize) -> f64 {
        self.cos_theta[j]
    }

    /// Node coordinates (colatitude, longitude) in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.nlat).flat_map(move |j| {
            let t = self.colatitude(j);
            (0..self.nlon).map(move |i| (t, self.longitude(i)))
        })
    }

    /// Highest total degree of a band-limited integrand the quadrature
    /// integrates exactly.
    pub fn exact_degree(&self) -> usize {
        (2 * self.nlat - 1).min(self.nlon - 1)
    }

    /// Fails unless the quadrature is exact for integrands of total degree
    /// `degree`.
    pub fn require_exact(&self, degree: usize, reason: &'static str) -> Result<()> {
        if self.exact_degree() >= degree {
            Ok(())
        } else {
            Err(Error::GridTooSmall { trunc: self.trunc, nlat: self.nlat, nlon: self.nlon, reason })
        }
    }

    /// `∫ f dS` by the product rule.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len(), "sample count mismatch");
        let dphi = 2.0 * PI / self.nlon as f64;
        let mut total = 0.0;
        for j in 0..self.nlat {
            let row: f64 = values[j * self.nlon..(j + 1) * self.nlon].iter().sum();
            total += self.weights[j] * row;
        }
        total * dphi
    }

    /// `‖f‖_{L²}` by quadrature.
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
        self.integrate(&sq).sqrt()
    }

    fn check_spectrum(&self, spectrum: &SpectralScalar) -> Result<()> {
        if spectrum.trunc() > self.trunc {
            return Err(Error::TruncationExceedsGrid { trunc: spectrum.trunc(), capacity: self.trunc });
        }
        Ok(())
    }

    fn synth_table(&self, spectrum: &SpectralScalar, table: &[f64], out: &mut [f64]) {
        let lmc = lm_count(self.trunc);
        let top = spectrum.trunc();
        let a = spectrum.coeffs();
        let nlon = self.nlon;
        let mut modes = self.fft.inverse.make_input_vec();
        let mut scratch = self.fft.inverse.make_scratch_vec();
        for j in 0..self.nlat {
            let tab = &table[j * lmc..(j + 1) * lmc];
            modes.fill(Complex::new(0.0, 0.0));
            for m in 0..=top {
                let base = m_offset(self.trunc, m);
                let (mut c, mut s) = (0.0, 0.0);
                for n in m..=top {
                    let p = tab[base + n - m];
                    c += a[cos_index(n, m)] * p;
                    if m > 0 {
                        s += a[sin_index(n, m)] * p;
                    }
                }
                let norm = fourier_norm(m);
                // the inverse real FFT doubles every mode above m = 0
                modes[m] =
                    if m == 0 { Complex::new(c * norm, 0.0) } else { Complex::new(0.5 * c * norm, -0.5 * s * norm) };
            }
            let row = &mut out[j * nlon..(j + 1) * nlon];
            self.fft
                .inverse
                .process_with_scratch(&mut modes, row, &mut scratch)
                .expect("buffer sizes come from the plan");
        }
    }

    /// Pointwise values `Σ a[n][k] Y_n^k` at every node.
    pub fn synthesis(&self, spectrum: &SpectralScalar) -> Result<Vec<f64>> {
        self.check_spectrum(spectrum)?;
        let mut out = vec![0.0; self.len()];
        self.synth_table(spectrum, &self.p, &mut out);
        Ok(out)
    }

    /// Quadrature projection onto every `Y_n^k` with `n <= trunc`.
    pub fn analysis(&self, values: &[f64]) -> Result<SpectralScalar> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: values.len() });
        }
        let mut spectrum = SpectralScalar::zeros(self.trunc);
        let lmc = lm_count(self.trunc);
        let nlon = self.nlon;
        let dphi = 2.0 * PI / nlon as f64;
        let a = spectrum.coeffs_mut();
        let mut row = self.fft.forward.make_input_vec();
        let mut modes = self.fft.forward.make_output_vec();
        let mut scratch = self.fft.forward.make_scratch_vec();
        for j in 0..self.nlat {
            row.copy_from_slice(&values[j * nlon..(j + 1) * nlon]);
            self.fft
                .forward
                .process_with_scratch(&mut row, &mut modes, &mut scratch)
                .expect("buffer sizes come from the plan");
            let tab = &self.p[j * lmc..(j + 1) * lmc];
            for m in 0..=self.trunc {
                // Σ_i f_i e^{-imφ_i} = Σ f cos(mφ) − i Σ f sin(mφ)
                let (c, s) = (modes[m].re, -modes[m].im);
                let factor = self.weights[j] * fourier_norm(m) * dphi;
                let base = m_offset(self.trunc, m);
                for n in m..=self.trunc {
                    let w = factor * tab[base + n - m];
                    a[cos_index(n, m)] += w * c;
                    if m > 0 {
                        a[sin_index(n, m)] += w * s;
                    }
                }
            }
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "sample", value: bad });
        }
        Ok(spectrum)
    }

    /// Surface gradient `∇f = (∂θ f, (1/sin θ) ∂φ f)`.
    pub fn grad_synthesis(&self, spectrum: &SpectralScalar) -> Result<VectorSamples> {
        self.check_spectrum(spectrum)?;
        let mut out = VectorSamples::zeros(self.len());
        self.synth_table(spectrum, &self.dp, &mut out.theta);
        self.synth_table(&spectrum.dphi(), &self.p, &mut out.phi);
        self.divide_by_sin(&mut out.phi, 1);
        Ok(out)
    }

    /// `∇⊥f = (∇f)⊥`.
    pub fn perp_synthesis(&self, spectrum: &SpectralScalar) -> Result<VectorSamples> {
        Ok(self.grad_synthesis(spectrum)?.perp())
    }

    /// Covariant Hessian of the synthesized scalar.
    pub fn hessian_synthesis(&self, spectrum: &SpectralScalar) -> Result<HessianSamples> {
        self.check_spectrum(spectrum)?;
        let len = self.len();
        let dphi = spectrum.dphi();
        let mut f_t = vec![0.0; len];
        let mut f_p = vec![0.0; len];
        let mut f_tp = vec![0.0; len];
        let mut f_pp = vec![0.0; len];
        let mut lap = vec![0.0; len];
        self.synth_table(spectrum, &self.dp, &mut f_t);
        self.synth_table(&dphi, &self.p, &mut f_p);
        self.synth_table(&dphi, &self.dp, &mut f_tp);
        self.synth_table(&dphi.dphi(), &self.p, &mut f_pp);
        self.synth_table(&spectrum.map_degree(|n| -eigenvalue(n)), &self.p, &mut lap);
        let mut h = HessianSamples { tt: vec![0.0; len], tp: vec![0.0; len], pp: vec![0.0; len] };
        for j in 0..self.nlat {
            let (s, c) = (self.sin_theta[j], self.cos_theta[j]);
            let cot = c / s;
            for i in 0..self.nlon {
                let q = j * self.nlon + i;
                let pp = f_pp[q] / (s * s) + cot * f_t[q];
                h.pp[q] = pp;
                h.tt[q] = lap[q] - pp;
                h.tp[q] = (f_tp[q] - cot * f_p[q]) / s;
            }
        }
        Ok(h)
    }

    fn divide_by_sin(&self, values: &mut [f64], power: i32) {
        for j in 0..self.nlat {
            let d = self.sin_theta[j].powi(power);
            for v in &mut values[j * self.nlon..(j + 1) * self.nlon] {
                *v /= d;
            }
        }
    }
}
