use anidiff::baselines::{moving_average, savitzky_golay, sg_coefficients, SgFilterSpec};
use anidiff::datagen::{pearson_vii, synthesize, NoiseSpec, PearsonPeakSpec};
use anidiff::diffusion::{pde_rhs, pm_coeff, pm_coeff_deriv, DiffusionConfig, DiffusionMode};
use anidiff::lssvr::{solve_kkt, DiffusionSolver, EvolutionState, KktSystem, LssvrConfig};
use anidiff::metrics::snr_db;
use anidiff::orthopoly::{gauss_rule, inner_product, legendre, legendre_derivs};
use anidiff::signal::{project, CubicSpline, SplineBoundary};
use anidiff::{BasisSpec, SampledSignal, SpectralSignal};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

proptest! {
    #[test]
    fn legendre_symmetry(n in 0usize..=20, x in -1.0f64..1.0) {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((legendre(n, -x) - sign * legendre(n, x)).abs() < 1e-13);
    }

    #[test]
    fn legendre_bounded(n in 0usize..=20, x in -1.0f64..=1.0) {
        prop_assert!(legendre(n, x).abs() <= 1.0 + 1e-13);
    }

    #[test]
    fn sturm_liouville(n in 0usize..=12, x in -1.0f64..1.0) {
        let [p, dp, ddp] = legendre_derivs(n, x);
        let lhs = (1.0 - x * x) * ddp - 2.0 * x * dp;
        let nf = n as f64;
        prop_assert!((lhs + nf * (nf + 1.0) * p).abs() < 1e-8);
    }

    #[test]
    fn spectral_linearity(
        u in weights(9), v in weights(9),
        a in -3.0f64..3.0, b in -3.0f64..3.0,
        x in 0.0f64..=1.0, d in 0usize..=2,
    ) {
        let basis = BasisSpec::orthonormal(8);
        let u = SpectralSignal::new(basis, u).unwrap();
        let v = SpectralSignal::new(basis, v).unwrap();
        let w = u.combine(a, &v, b).unwrap();
        let lhs = w.eval(x, d).unwrap();
        let (ua, vb) = (a * u.eval(x, d).unwrap(), b * v.eval(x, d).unwrap());
        prop_assert!((lhs - (ua + vb)).abs() < 1e-12 * (1.0 + ua.abs() + vb.abs()));
    }

    #[test]
    fn parseval_at_projection(coeffs in weights(7)) {
        // A degree-6 polynomial in monomials, projected onto degree 10.
        let poly = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let samples = SampledSignal::from_fn(101, poly).unwrap();
        let u = project(&samples, BasisSpec::orthonormal(10), 1e-14).unwrap();
        let rule = gauss_rule(12).unwrap();
        let quad = inner_product(|x| u.eval_derivs(x)[0], |x| u.eval_derivs(x)[0], &rule);
        prop_assert!((u.energy() - quad).abs() < 1e-10 * (1.0 + quad));
    }

    #[test]
    fn not_a_knot_spline_reproduces_cubics(
        c in prop::collection::vec(-5.0f64..5.0, 4),
        n in 4usize..30,
        x in 0.0f64..=1.0,
    ) {
        let f = |x: f64| c[0] + x * (c[1] + x * (c[2] + x * c[3]));
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let s = CubicSpline::fit(&xs, &ys, SplineBoundary::NotAKnot).unwrap();
        prop_assert!((s.eval(x, 0).unwrap() - f(x)).abs() < 1e-9);
    }

    #[test]
    fn natural_spline_is_c2_at_knots(ys in prop::collection::vec(-1.0f64..1.0, 5..20)) {
        let n = ys.len();
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let s = CubicSpline::fit(&xs, &ys, SplineBoundary::Natural).unwrap();
        for (i, &x) in xs.iter().enumerate().take(n - 1).skip(1) {
            for d in 0..=2 {
                let left = s.eval_piece(i - 1, x, d);
                let right = s.eval_piece(i, x, d);
                prop_assert!((left - right).abs() < 1e-9, "knot {} derivative {}", i, d);
            }
        }
    }

    #[test]
    fn pearson_symmetric_and_decaying(
        height in 0.1f64..5.0, mu in -2.0f64..2.0,
        sigma in 0.05f64..3.0, q in 0.1f64..10.0,
        d in 0.0f64..4.0, step in 1e-3f64..1.0,
    ) {
        let p = PearsonPeakSpec { height, position: mu, width: sigma, shape: q };
        let a = pearson_vii(&p, mu + d);
        let b = pearson_vii(&p, mu - d);
        prop_assert!((a - b).abs() <= 1e-14 * height);
        prop_assert!(pearson_vii(&p, mu + d + step) < a);
    }

    #[test]
    fn noise_is_deterministic(seed in any::<u64>()) {
        let peak = PearsonPeakSpec { height: 1.0, position: 0.5, width: 0.3, shape: 1.0 };
        let noise = NoiseSpec { seed, knot_count: 16, amplitude: 0.1 };
        let a = synthesize(&[peak], &noise, 51, [0.0, 1.0]).unwrap();
        let b = synthesize(&[peak], &noise, 51, [0.0, 1.0]).unwrap();
        prop_assert_eq!(a.noisy, b.noisy);
    }

    #[test]
    fn pm_coefficient_derivative_matches_differences(edge in 0.1f64..5.0, s in 0.01f64..10.0, rational: bool) {
        let mode = if rational { DiffusionMode::PmRational { edge } } else { DiffusionMode::PmExponential { edge } };
        let cfg = DiffusionConfig::new(mode, 0.01, 1);
        let h = 1e-6 * s.max(edge);
        let fd = (pm_coeff(&cfg, s + h) - pm_coeff(&cfg, s - h)) / (2.0 * h);
        let exact = pm_coeff_deriv(&cfg, s);
        prop_assert!((fd - exact).abs() <= 1e-7 * exact.abs().max(1e-6), "{} vs {}", fd, exact);
    }

    #[test]
    fn large_edge_constant_is_isotropic(ux in -10.0f64..10.0, uxx in -100.0f64..100.0, rational: bool) {
        let edge = 1e6;
        let mode = if rational { DiffusionMode::PmRational { edge } } else { DiffusionMode::PmExponential { edge } };
        let cfg = DiffusionConfig::new(mode, 0.01, 1);
        prop_assert!((pde_rhs(&cfg, ux, uxx) - uxx).abs() < 1e-9 * uxx.abs() + 1e-9);
    }

    #[test]
    fn sg_coefficients_unit_gain_and_symmetric(half in 1usize..12, deg in 0usize..8) {
        prop_assume!(deg < 2 * half + 1);
        let c = sg_coefficients(&SgFilterSpec { half_width: half, degree: deg }).unwrap();
        prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..c.len() {
            prop_assert!((c[i] - c[c.len() - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sg_reproduces_polynomials(
        half in 1usize..8, deg in 0usize..6,
        coeffs in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        prop_assume!(deg < 2 * half + 1);
        let poly = |x: f64| coeffs[..=deg].iter().rev().fold(0.0, |acc, c| acc * x + c);
        let s = SampledSignal::from_fn(60, poly).unwrap();
        let out = savitzky_golay(&s, &SgFilterSpec { half_width: half, degree: deg }).unwrap();
        for (&x, &y) in out.xs().iter().zip(out.ys()) {
            prop_assert!((y - poly(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn moving_average_stays_in_range(ys in prop::collection::vec(-10.0f64..10.0, 12..40), half in 0usize..5) {
        let s = SampledSignal::from_fn(ys.len(), |_| 0.0).unwrap().with_values(ys.clone()).unwrap();
        let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for &y in moving_average(&s, half).unwrap().ys() {
            prop_assert!(y >= lo - 1e-12 && y <= hi + 1e-12);
        }
    }

    #[test]
    fn snr_grows_when_residual_shrinks(
        s in prop::collection::vec(0.5f64..2.0, 8),
        r in prop::collection::vec(-1.0f64..1.0, 8),
        shrink in 0.1f64..0.95,
    ) {
        prop_assume!(r.iter().any(|v| v.abs() > 1e-3));
        let smoothed = SampledSignal::from_fn(8, |_| 0.0).unwrap().with_values(s.clone()).unwrap();
        let f1: Vec<f64> = s.iter().zip(&r).map(|(a, b)| a + b).collect();
        let f2: Vec<f64> = s.iter().zip(&r).map(|(a, b)| a + shrink * b).collect();
        let a = snr_db(&smoothed, &smoothed.with_values(f1).unwrap(), [0.0, 1.0]).unwrap();
        let b = snr_db(&smoothed, &smoothed.with_values(f2).unwrap(), [0.0, 1.0]).unwrap();
        prop_assert!(b.db() > a.db());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ridge_shrinkage_is_monotone(
        seed_a in prop::collection::vec(-1.0f64..1.0, 8 * 5),
        seed_b in prop::collection::vec(-1.0f64..1.0, 8),
        g1 in 1e-2f64..1e2, factor in 1.5f64..1e3,
    ) {
        let a = DMatrix::from_row_slice(8, 5, &seed_a);
        let b = DVector::from_column_slice(&seed_b);
        let hard = DMatrix::from_row_slice(1, 5, &[1.0, 1.0, 1.0, 1.0, 1.0]);
        let g = DVector::from_element(1, 0.3);
        let norm = |gamma: f64| {
            let sys = KktSystem { a: a.clone(), b: b.clone(), hard: hard.clone(), g: g.clone(), solution: None };
            solve_kkt(sys, gamma).unwrap().solution.unwrap().w.norm()
        };
        prop_assert!(norm(g1) <= norm(g1 * factor) * (1.0 + 1e-12));
    }

    #[test]
    fn endpoints_stay_pinned(
        w in weights(13),
        edge in 0.3f64..5.0,
        dt in 1e-4f64..5e-3,
        galerkin: bool,
    ) {
        let basis = BasisSpec::orthonormal(12);
        let u0 = SpectralSignal::new(basis, w.iter().map(|v| v * 0.3).collect()).unwrap();
        let targets = [u0.eval_derivs(0.0)[0], u0.eval_derivs(1.0)[0]];
        let scfg = if galerkin { LssvrConfig::galerkin(12, 1e6) } else { LssvrConfig::collocation(12, 1e6) };
        let dcfg = DiffusionConfig::new(DiffusionMode::PmExponential { edge }, dt, 5);
        let solver = DiffusionSolver::new(dcfg, scfg, targets).unwrap();
        let mut state = EvolutionState::initial(u0);
        for _ in 0..5 {
            state = solver.step(&state).unwrap();
            prop_assert!((state.u.eval_derivs(0.0)[0] - targets[0]).abs() < 1e-9);
            prop_assert!((state.u.eval_derivs(1.0)[0] - targets[1]).abs() < 1e-9);
        }
    }
}

#[test]
fn pm_coefficients_decrease_to_zero() {
    for mode in [
        DiffusionMode::PmExponential { edge: 0.7 },
        DiffusionMode::PmRational { edge: 0.7 },
    ] {
        let cfg = DiffusionConfig::new(mode, 0.01, 1);
        assert_eq!(pm_coeff(&cfg, 0.0), 1.0);
        let grid: Vec<f64> = (-40..=40).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
        for w in grid.windows(2) {
            let (a, b) = (pm_coeff(&cfg, w[0]), pm_coeff(&cfg, w[1]));
            // strict until the exponential underflows
            assert!(b < a || (a == 0.0 && b == 0.0), "{mode:?} at {}", w[1]);
        }
        assert!(pm_coeff(&cfg, 1e4) < 1e-7);
    }
}
