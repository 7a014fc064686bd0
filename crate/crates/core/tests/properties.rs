use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use semilinear_core::degree::{brouwer_degree, Ball, DegreeOptions, FiniteMap};
use semilinear_core::monotone::{self, Growth, LinearMap, NonlinearMap};
use semilinear_core::nonlinearities::{NemytskiiMap, RadialMap, ScalarFn};
use semilinear_core::solver::{self, ContinuationOptions, SolveStatus, Strategy as SolveStrategy};
use semilinear_core::spectral::{self, SymOperator};

fn sym_matrix(max_dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_dim).prop_flat_map(|n| {
        proptest::collection::vec(-5.0..5.0f64, n * n).prop_map(move |v| {
            let m = DMatrix::from_vec(n, n, v);
            (&m + m.transpose()) * 0.5
        })
    })
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigendecomposition_reconstructs(m in sym_matrix(12)) {
        let op = SymOperator::new(m).unwrap();
        let dec = spectral::eigendecompose(&op).unwrap();
        prop_assert!(dec.reconstruction_defect(&op) <= 1e-10);
        prop_assert!(dec.orthonormality_defect() <= 1e-10);
        let ev = dec.eigenvalues();
        prop_assert!(ev.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn auto_split_invariants(m in sym_matrix(10)) {
        let op = SymOperator::new(m).unwrap();
        let dec = spectral::eigendecompose(&op).unwrap();
        let split = spectral::decompose_space_auto(&dec);
        prop_assert!(split.projection_defect() <= 1e-10);
        let n = split.dim();
        let id = DMatrix::<f64>::identity(n, n);
        prop_assert!((&split.p1 + &split.p2 - id).abs().max() <= 1e-10);
        prop_assert!((split.operator() - op.matrix()).abs().max() <= 1e-9);
        if split.s > 0 {
            prop_assert!(split.k_norm() <= 1.0 / split.delta + 1e-10);
            // K inverts L on H1
            let e1 = split.h1_basis();
            let back = &split.k * &split.l1 * &e1;
            prop_assert!((back - &e1).abs().max() <= 1e-8);
        }
    }

    #[test]
    fn nemytskii_resolvent_matches_bisection(
        b in proptest::collection::vec(-20.0..20.0f64, 1..8),
        lambda in 0.05..10.0f64,
    ) {
        let n = b.len();
        let map = NemytskiiMap::new(n, ScalarFn::SinPerturbed { slope: 0.5, amplitude: 0.25 }, 4.0 / 3.0, 0.25).unwrap();
        let bv = DVector::from_vec(b.clone());
        let u = monotone::resolvent(&map, lambda, &bv, 1e-12).unwrap();
        for i in 0..n {
            let oracle = bisect(|t| 0.5 * t + 0.25 * t.sin() + lambda * t - b[i], -100.0, 100.0);
            prop_assert!((u[i] - oracle).abs() <= 1e-10, "{} vs {}", u[i], oracle);
        }
    }

    #[test]
    fn radial_ray_identity(
        dir in proptest::collection::vec(-1.0..1.0f64, 2..6),
        r in 1.0001..1e3f64,
    ) {
        let d = DVector::from_vec(dir);
        prop_assume!(d.norm() > 1e-3);
        let u = d.normalize() * r;
        for phi in [ScalarFn::Constant(2.0), ScalarFn::Arctan { scale: 1.5 }, ScalarFn::Power { coeff: 0.3, exponent: 0.5 }] {
            let map = RadialMap::new(u.len(), phi.clone()).unwrap();
            let lhs = map.eval(&u).dot(&u) / u.norm();
            let rhs = phi.eval(u.norm());
            prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn linear_degree_is_sign_of_determinant(v in proptest::collection::vec(-2.0..2.0f64, 9)) {
        let m = DMatrix::from_vec(3, 3, v);
        let det = m.determinant();
        prop_assume!(det.abs() > 1e-2);
        let f = FiniteMap::linear(m);
        let r = brouwer_degree(&f, &Ball::centered(3, 1.0), &DVector::zeros(3), &DegreeOptions::default()).unwrap();
        prop_assert_eq!(r.degree, det.signum() as i64);
        prop_assert_eq!(r.oracle_degree, Some(r.sign_sum_degree));
    }

    #[test]
    fn radius_bound_grows_as_eps_shrinks(
        h in proptest::collection::vec(-3.0..3.0f64, 3),
        coeff in 0.0..2.0f64,
        exponent in 0.0..0.9f64,
    ) {
        let dec = spectral::eigendecompose(&SymOperator::from_diagonal(&[-2.0, 0.0, 1.0]).unwrap()).unwrap();
        let split = spectral::decompose_space(&dec, 1.0).unwrap();
        let h = DVector::from_vec(h);
        let g = Growth::Sublinear { coeff, exponent };
        let mut last = 0.0;
        for eps in [0.9, 0.5, 0.1, 0.01] {
            let r = solver::radius_bound(&h, eps, &split, g);
            prop_assert!(r.is_finite());
            prop_assert!(r >= 2.0 * split.project2(&h).norm() / eps);
            prop_assert!(r >= last * (1.0 - 1e-12));
            last = r;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn linear_continuation_matches_direct_solve(
        h in proptest::collection::vec(-2.0..2.0f64, 4),
        beta in 0.5..3.0f64,
    ) {
        let diag = [-2.0, -1.0, 0.0, 1.5];
        let dec = spectral::eigendecompose(&SymOperator::from_diagonal(&diag).unwrap()).unwrap();
        let split = spectral::decompose_space(&dec, 1.0).unwrap();
        let map = LinearMap::scaled_identity(4, beta);
        let h = DVector::from_vec(h);
        let opts = ContinuationOptions { tol: 1e-11, ..Default::default() };
        let rep = solver::continuation(&split, &map, &h, &opts).unwrap();
        prop_assert_eq!(rep.status, SolveStatus::Converged);
        let u = DVector::from_vec(rep.solution.unwrap());
        for i in 0..4 {
            let exact = h[i] / (diag[i] + beta);
            prop_assert!((u[i] - exact).abs() <= 1e-9);
        }
    }
}

#[test]
fn warm_start_does_not_change_the_answer() {
    let f = ScalarFn::SinPerturbed { slope: 0.5, amplitude: 0.25 };
    for seed in 0..5u64 {
        let n = 6;
        let eig = [-2.4, -1.6, 0.0, 0.3, 1.0, 2.0];
        let op = semilinear_core::problems::synthetic_spectrum(&eig, seed).unwrap();
        let split = spectral::decompose_space(&spectral::eigendecompose(&op).unwrap(), 1.5).unwrap();
        let map = NemytskiiMap::new(n, f.clone(), 4.0 / 3.0, 0.25).unwrap();
        let h = DVector::from_fn(n, |i, _| ((i as u64 + seed) % 3) as f64 - 1.0);
        let tol = 1e-10;
        let base = ContinuationOptions { tol, strategy: SolveStrategy::MonotoneInversion, ..Default::default() };
        let warm = solver::continuation(&split, &map, &h, &base).unwrap();
        let cold = solver::continuation(&split, &map, &h, &ContinuationOptions { warm_start: false, ..base }).unwrap();
        assert_eq!(warm.status, SolveStatus::Converged);
        assert_eq!(cold.status, SolveStatus::Converged);
        let (a, b) = (DVector::from_vec(warm.solution.unwrap()), DVector::from_vec(cold.solution.unwrap()));
        assert!((a - b).norm() <= 10.0 * tol);
    }
}
