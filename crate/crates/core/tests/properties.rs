use bardina::bounds::{dimension_bound, Domain};
use bardina::dynamics::{nonlinear_term, rhs, SimConfig};
use bardina::fields::{alpha_inner, helmholtz_apply, helmholtz_invert, AlphaParams, DivFreeField};
use bardina::inequalities::{eval_f, eval_r, lieb_family_check_on, FamilyKind};
use bardina::io::{read_checkpoint, write_checkpoint, Checkpoint};
use bardina::lyapunov::{alpha_qr, stretching_inequality_check_on, TangentBundle};
use bardina::sht::{build_grid, mode_count, Grid, SpectralScalar};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::SQRT_2;

fn spectrum(max_trunc: usize) -> impl Strategy<Value = SpectralScalar> {
    (1..=max_trunc).prop_flat_map(|t| {
        prop::collection::vec(-1.0f64..1.0, mode_count(t))
            .prop_map(move |c| SpectralScalar::from_coeffs(t, c).expect("sized"))
    })
}

fn zero_mean(max_trunc: usize) -> impl Strategy<Value = SpectralScalar> {
    spectrum(max_trunc).prop_map(|mut s| {
        s.coeffs_mut()[0] = 0.0;
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn synthesis_then_analysis_is_identity(s in spectrum(24), dealias in any::<bool>()) {
        let grid = build_grid(s.trunc(), dealias).unwrap();
        let back = grid.analysis(&grid.synthesis(&s).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn quadrature_matches_parseval(s in spectrum(24)) {
        let grid = build_grid(s.trunc(), false).unwrap();
        let v: Vec<f64> = grid.synthesis(&s).unwrap().iter().map(|x| x * x).collect();
        let total = s.norm_sq();
        prop_assert!((grid.integrate(&v) - total).abs() <= 1e-10 * total.max(1e-300));
    }

    #[test]
    fn smoothing_contracts_and_inverts(s in spectrum(20), alpha in 1e-4f64..10.0) {
        let smoothed = helmholtz_invert(&s, alpha).unwrap();
        prop_assert!(smoothed.norm_sq() <= s.norm_sq() * (1.0 + 1e-15));
        let back = helmholtz_apply(&smoothed, alpha).unwrap();
        prop_assert!(back.max_abs_diff(&s) < 1e-12 * (1.0 + alpha * 420.0));
    }

    #[test]
    fn advection_is_orthogonal_to_vorticity_and_streamfunction(w in zero_mean(12)) {
        let grid = build_grid(w.trunc(), true).unwrap();
        let j = nonlinear_term(&w, &grid).unwrap();
        let psi = w.map_degree(|n| if n == 0 { 0.0 } else { 1.0 / (n * (n + 1)) as f64 });
        let scale = w.norm_sq() * w.trunc().pow(3) as f64;
        prop_assert!(j.dot(&w).abs() < 1e-11 * scale);
        prop_assert!(j.dot(&psi).abs() < 1e-11 * scale);
        prop_assert_eq!(j.mean_coeff(), 0.0);
    }

    #[test]
    fn right_hand_side_keeps_zero_mean(w in zero_mean(10), alpha in 0.01f64..1.0, gamma in 0.1f64..2.0) {
        let mut cfg = SimConfig::new(AlphaParams::new(alpha, gamma).unwrap(), w.trunc());
        cfg.forcing = DivFreeField::basis(w.trunc(), 1, 2);
        prop_assert_eq!(rhs(&w, &cfg).unwrap().mean_coeff(), 0.0);
    }

    #[test]
    fn alpha_qr_returns_orthonormal_family(seed in any::<u64>(), n in 1usize..6, alpha in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family: Vec<DivFreeField> = (0..n).map(|_| DivFreeField::random(6, &mut rng)).collect();
        let (q, r) = alpha_qr(&family, alpha).unwrap();
        prop_assert!(r.iter().all(|&d| d > 0.0));
        for (i, a) in q.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((alpha_inner(a, b, alpha) - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn series_stays_below_one(log_m in -3.0f64..3.0) {
        let e = eval_f(10f64.powf(log_m), 1e-10).unwrap();
        prop_assert!(e.upper() < 1.0);
    }

    #[test]
    fn remainder_identity_and_bound(m in SQRT_2..100.0) {
        let f = eval_f(m, 1e-13).unwrap();
        let r = eval_r(m, 1e-13).unwrap();
        prop_assert!(r.upper() < 0.25);
        let width = m * m * f.tail_bound + 4.0 * r.tail_bound + 1e-12 * m * m;
        prop_assert!((m * m * (1.0 - f.value) - (1.0 - 4.0 * r.value)).abs() <= width);
    }

    #[test]
    fn dimension_bound_power_laws(alpha in 0.01f64..1.0, gamma in 0.1f64..4.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DivFreeField::random(6, &mut rng);
        let b = dimension_bound(alpha, gamma, &g, Domain::Sphere).unwrap();
        let b2 = dimension_bound(alpha, 2.0 * gamma, &g, Domain::Sphere).unwrap();
        prop_assert!((b2 * 16.0 - b).abs() <= 1e-12 * b);
        let bg = dimension_bound(alpha, gamma, &g.scaled(2.0), Domain::Sphere).unwrap();
        prop_assert!((bg - 4.0 * b).abs() <= 1e-12 * b);
        prop_assert!(b <= dimension_bound(alpha, gamma, &g, Domain::Subdomain).unwrap() * (1.0 + 1e-15));
    }

    #[test]
    fn checkpoint_round_trip(s in spectrum(10), alpha in 1e-6f64..10.0, t in 0.0f64..1e4) {
        let cp = Checkpoint { trunc: s.trunc(), alpha, gamma: 1.0 / 3.0, t, omega: s };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &cp).unwrap();
        prop_assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), cp);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn collective_sobolev_slack_is_nonnegative(
        kind_index in 0usize..3,
        m in prop::sample::select(vec![0.5, 1.0, 2.0, 10.0]),
        n in prop::sample::select(vec![1usize, 2, 4, 8, 16]),
        seed in any::<u64>(),
    ) {
        let trunc = 6;
        let grid = Grid::quartic(trunc).unwrap();
        let kind = match kind_index {
            0 => FamilyKind::Vector { m },
            1 => FamilyKind::Scalar { m },
            _ => FamilyKind::Alpha { alpha: 1.0 / (m * m) },
        };
        let c = lieb_family_check_on(&grid, kind, n, trunc, seed).unwrap();
        prop_assert!(c.slack >= -1e-10);
    }

    #[test]
    fn stretching_slack_is_nonnegative(seed in any::<u64>(), n in 1usize..=8, alpha in 0.01f64..1.0) {
        let trunc = 5;
        let grid = Grid::quartic(trunc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = DivFreeField::random(trunc, &mut rng);
        let family = TangentBundle::random(trunc, n, alpha, 1, seed).unwrap();
        prop_assert!(stretching_inequality_check_on(&grid, &u, &family.thetas).unwrap() >= -1e-10);
    }
}
