//! Normalized associated Legendre functions and Gauss–Legendre nodes.
//!
//! `P̃_n^m` here is normalized so that `∫_{-1}^{1} P̃_n^m(x)^2 dx = 1`, without
//! the Condon–Shortley phase. Values are stored in "m-major" order: all
//! degrees `n = m..=N` for `m = 0`, then `m = 1`, and so on.

/// Number of `(n, m)` pairs with `0 <= m <= n <= trunc`.
pub fn lm_count(trunc: usize) -> usize {
    (trunc + 1) * (trunc + 2) / 2
}

/// Offset of the first entry of order `m` in an m-major table.
#[inline]
pub fn m_offset(trunc: usize, m: usize) -> usize {
    // sum_{j<m} (trunc + 1 - j)
    m * (trunc + 1) - m * (m.saturating_sub(1)) / 2
}

#[inline]
pub fn lm_index(trunc: usize, n: usize, m: usize) -> usize {
    m_offset(trunc, m) + (n - m)
}

/// Fills `p` with `P̃_n^m(cos θ)` and `dp` with `dP̃_n^m/dθ` for all
/// `0 <= m <= n <= trunc`, using the three-term recurrence in degree.
///
/// `x = cos θ` and `sin_theta = sin θ`; the derivative divides by
/// `sin θ`, so poles are excluded.
pub fn legendre_column(trunc: usize, x: f64, sin_theta: f64, p: &mut [f64], dp: &mut [f64]) {
    debug_assert!(p.len() >= lm_count(trunc) && dp.len() >= lm_count(trunc));
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for m in 0..=trunc {
        if m > 0 {
            let mf = m as f64;
            pmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_theta;
        }
        let base = m_offset(trunc, m);
        p[base] = pmm;
        if m < trunc {
            p[base + 1] = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
        }
        let m2 = (m * m) as f64;
        for n in (m + 2)..=trunc {
            let nf = n as f64;
            let a = ((4.0 * nf * nf - 1.0) / (nf * nf - m2)).sqrt();
            let nm1 = nf - 1.0;
            let b = ((nm1 * nm1 - m2) / (4.0 * nm1 * nm1 - 1.0)).sqrt();
            p[base + n - m] = a * (x * p[base + n - m - 1] - b * p[base + n - m - 2]);
        }
        for n in m..=trunc {
            let nf = n as f64;
            let prev = if n > m {
                ((2.0 * nf + 1.0) * (nf * nf - m2) / (2.0 * nf - 1.0)).sqrt() * p[base + n - m - 1]
            } else {
                0.0
            };
            dp[base + n - m] = (nf * x * p[base + n - m] - prev) / sin_theta;
        }
    }
}

/// Gauss–Legendre nodes `x_i` (descending, i.e. north to south) and weights
/// on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dpn = 1.0;
        for _ in 0..100 {
            let (pn, d) = legendre_and_derivative(n, x);
            dpn = d;
            let dx = pn / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_and_derivative(n, x);
                dpn = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dpn * dpn);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
