use acd_core::analysis::gradient_difference_check;
use acd_core::cli::smooth_gradient_fd;
use acd_core::problems::{
    build_lower_bound_matrix, make_lasso, make_ridge, make_sparse_quadratic, parse_problem, read_problem,
    smallest_eigenvalue, spectral_norm, write_problem, CompositeProblem, Hessian,
};
use acd_core::PsiSpec;
use proptest::prelude::*;

fn generated() -> impl Strategy<Value = CompositeProblem> {
    prop_oneof![
        (1usize..24, any::<u64>(), 0.01..5.0f64).prop_map(|(n, s, c)| make_ridge(n, s, c).unwrap()),
        (1usize..24, any::<u64>(), 0.0..2.0f64).prop_map(|(n, s, w)| make_lasso(n, s, w).unwrap()),
        (2usize..64, 0usize..8, any::<u64>()).prop_map(|(n, d, s)| make_sparse_quadratic(n, d, s).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn gradient_matches_differences(p in generated(), seed in any::<u64>()) {
        let err = smooth_gradient_fd(&p, 100, seed);
        prop_assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn cross_constants_are_exact_for_quadratics(
        (n, seed) in (2usize..12, any::<u64>()),
        j in 0usize..12,
        r in -3.0..3.0f64,
        xs in prop::collection::vec(-2.0..2.0f64, 12),
    ) {
        let p = make_ridge(n, seed, 1.0).unwrap();
        let j = j % n;
        let x = &xs[..n];
        let mut y = x.to_vec();
        y[j] += r;
        for k in 0..n {
            let diff = (p.partial(k, &y) - p.partial(k, x)).abs();
            let l = p.lipschitz.entry(j, k).unwrap();
            prop_assert!((diff - l * r.abs()).abs() <= 1e-9 * (1.0 + diff), "k={k} diff={diff} l={l}");
        }
    }

    #[test]
    fn gradient_difference_bound(
        p in generated(),
        a in prop::collection::vec(-2.0..2.0f64, 64),
        b in prop::collection::vec(-2.0..2.0f64, 64),
    ) {
        let n = p.dim();
        let (lhs, rhs) = gradient_difference_check(&p, &a[..n], &b[..n]);
        prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn generated_problems_round_trip(p in generated()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        write_problem(&p, &path).unwrap();
        prop_assert_eq!(read_problem(&path).unwrap(), p);
    }
}

#[test]
fn explicit_problem_round_trips() {
    let h = Hessian::dense(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
    let psi = vec![PsiSpec::abs(0.3).unwrap(), PsiSpec::hinge(1.5).unwrap()];
    let p = CompositeProblem::quadratic(h, vec![0.1, -0.7], 0.25, psi).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.toml");
    write_problem(&p, &path).unwrap();
    assert_eq!(read_problem(&path).unwrap(), p);
}

#[test]
fn lower_bound_family_spectrum() {
    for n in [5, 20, 60] {
        let fam = build_lower_bound_matrix(n).unwrap();
        let top = spectral_norm(&fam.a_matrix(), 5000, 1e-12);
        assert!(top.value <= 4.5, "n={n} norm {}", top.value);
        let low = smallest_eigenvalue(&fam.m_matrix(), 20000, 1e-12);
        assert!(low.value >= 4.5 - 1e-6, "n={n} smallest {}", low.value);
    }
}

#[test]
fn malformed_problem_files() {
    assert!(parse_problem("kind = \"ridge\"\nn = 0\nseed = 1\ncurvature = 1.0").is_err());
    assert!(parse_problem("kind = \"sparse\"\nn = 1\ndegree = 2\nseed = 1").is_err());
    assert!(parse_problem("kind = \"quadratic\"\nhessian = [[1.0, 2.0]]\nlinear = [0.0]\nconstant = 0.0\npsi = [\"zero\"]").is_err());
    assert!(parse_problem("not toml at all").is_err());
}
