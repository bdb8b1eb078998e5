use hermite_pat::forward::{add_noise, SyntheticData};
use hermite_pat::galerkin_2d::DetectionDirection;
use hermite_pat::hermite::{eval_hermite_fn, feldheim_beta, product_expand, HermiteBasisSpec};
use hermite_pat::phantom::PhantomId;
use hermite_pat::quadrature::{Grid1D, Interval, TensorGrid};
use hermite_pat::spectral::{hilbert_coeffs, sign_overlap_matrix, HermiteExpansion};
use hermite_pat::tikhonov::{menger_curvature, normal_equations, solve_tikhonov, tikhonov_sweep};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex_system(rows: usize, cols: usize, vals: &[f64]) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let mut it = vals.iter().cycle();
    let mut next = || Complex64::new(*it.next().unwrap(), *it.next().unwrap());
    let g = DMatrix::from_fn(rows, cols, |_, _| next());
    let rhs = DVector::from_fn(rows, |_, _| next());
    (g, rhs)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_is_symmetric(k in 0usize..40, l in 0usize..40, m in 0usize..40) {
        prop_assume!(m <= k.min(l));
        prop_assert_eq!(feldheim_beta(k, l, m).unwrap(), feldheim_beta(l, k, m).unwrap());
    }

    #[test]
    fn product_identity_pointwise(k in 0usize..=12, l in 0usize..=12, x in -6.0f64..6.0) {
        let rhs: f64 = product_expand(k, l).unwrap().entries.iter().map(|&(d, w)| w * eval_hermite_fn(d, x)).sum();
        let lhs = eval_hermite_fn(k, x) * eval_hermite_fn(l, x);
        prop_assert!((lhs - (-0.5 * x * x).exp() * rhs).abs() < 1e-9);
    }

    #[test]
    fn hilbert_is_linear(
        a in prop::collection::vec(-1.0f64..1.0, 12),
        b in prop::collection::vec(-1.0f64..1.0, 12),
        s in -3.0f64..3.0,
        t in -3.0f64..3.0,
    ) {
        let basis = vec![HermiteBasisSpec::frequency(12).unwrap()];
        let sm = sign_overlap_matrix(12).unwrap();
        let h = |c: Vec<f64>| hilbert_coeffs(&HermiteExpansion::new(basis.clone(), c).unwrap(), &sm).unwrap().coeffs().to_vec();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + t * y).collect();
        let (ha, hb, hm) = (h(a), h(b), h(mix));
        for i in 0..12 {
            prop_assert!((hm[i] - (s * ha[i] + t * hb[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn tikhonov_sweep_is_monotone(vals in prop::collection::vec(-1.0f64..1.0, 64), rows in 4usize..9, cols in 2usize..5) {
        let (g, rhs) = complex_system(rows, cols, &vals);
        let lambdas: Vec<f64> = (0..12).map(|i| 10f64.powf(-8.0 + i as f64 * 0.75)).collect();
        let xs = tikhonov_sweep(&g, &rhs, &lambdas).unwrap();
        let res: Vec<f64> = xs.iter().map(|x| hermite_pat::tikhonov::residual_norm(&g, &rhs, x)).collect();
        let sol: Vec<f64> = xs.iter().map(|x| x.norm()).collect();
        for i in 1..xs.len() {
            prop_assert!(res[i] >= res[i - 1] - 1e-10 * res[i - 1].max(1.0));
            prop_assert!(sol[i] <= sol[i - 1] + 1e-10 * sol[i - 1].max(1.0));
        }
    }

    #[test]
    fn tikhonov_solution_satisfies_normal_equations(
        vals in prop::collection::vec(-1.0f64..1.0, 64),
        rows in 4usize..9,
        cols in 2usize..5,
        log_lambda in -6.0f64..1.0,
    ) {
        let (g, rhs) = complex_system(rows, cols, &vals);
        let lambda = 10f64.powf(log_lambda);
        let x = solve_tikhonov(&g, &rhs, lambda).unwrap();
        let (n, b) = normal_equations(&g, &rhs);
        let r = &n * &x + &x * lambda - b;
        prop_assert!(r.amax() < 1e-8 * rhs.norm());
    }

    #[test]
    fn noise_has_exact_relative_level(dp in 0.0f64..0.5, dm in 0.0f64..0.5, seed in any::<u64>()) {
        let pat_grid = TensorGrid::new(vec![
            Grid1D::gauss_legendre(Interval::symmetric(2.0), 7),
            Grid1D::gauss_legendre(Interval::symmetric(3.0), 9),
        ]);
        let pat: Vec<f64> = (0..63).map(|i| (i as f64 * 0.37).sin() + 0.1).collect();
        let oct_grid = Grid1D::gauss_legendre(Interval::symmetric(2.0), 11);
        let oct: Vec<Complex64> = (0..11).map(|i| Complex64::new((i as f64).cos(), 0.3 * i as f64)).collect();
        let clean = SyntheticData::noiseless(PhantomId::Ex1, pat_grid, pat.clone(), oct_grid, vec![], oct.clone(), false).unwrap();
        let noisy = add_noise(&clean, dp, dm, seed).unwrap();
        let dpat: Vec<f64> = noisy.pat_noisy.iter().zip(&pat).map(|(a, b)| a - b).collect();
        prop_assert!((l2(&dpat) / l2(&pat) - dp).abs() < 1e-12);
        let doct: Vec<f64> = noisy.oct_noisy.iter().zip(&oct).map(|(a, b)| (a - b).norm()).collect();
        let moct: Vec<f64> = oct.iter().map(|z| z.norm()).collect();
        prop_assert!((l2(&doct) / l2(&moct) - dm).abs() < 1e-12);
        prop_assert_eq!(add_noise(&clean, dp, dm, seed).unwrap(), noisy);
    }

    #[test]
    fn angles_give_valid_directions(phi in 0.01f64..(std::f64::consts::PI - 0.01)) {
        let d = DetectionDirection::from_angle(phi).unwrap();
        prop_assert!(d.theta3_tilde() > 1.0 && d.theta3_tilde() <= 2.0);
        let [a, b, c] = d.theta();
        prop_assert!((a * a + b * b + c * c - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn collinear_points_have_zero_curvature(x0 in -5.0f64..5.0, dx in 0.1f64..2.0, slope in -3.0f64..3.0) {
        let p = |i: f64| (x0 + i * dx, slope * (x0 + i * dx));
        prop_assert!(menger_curvature(p(0.0), p(1.0), p(2.0)).abs() < 1e-10);
    }
}
