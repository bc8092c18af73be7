use acd_core::analysis::{lemma_checks, prox_oracle, LemmaTuple};
use acd_core::{prox_step, w_value, PsiSpec};
use proptest::prelude::*;

fn psi() -> impl Strategy<Value = PsiSpec> {
    prop_oneof![
        Just(PsiSpec::Zero),
        (0.0..3.0f64).prop_map(PsiSpec::AbsWeighted),
        (0.0..5.0f64, -3.0..3.0f64).prop_map(|(a, b)| PsiSpec::Quadratic { a, b }),
        (0.0..3.0f64).prop_map(PsiSpec::HingeWeighted),
    ]
}

fn gamma() -> impl Strategy<Value = f64> {
    (-1.0..2.0f64).prop_map(|e| 10f64.powf(e))
}

fn slack(scale: f64) -> f64 {
    1e-9 * scale.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn w_hat_nonnegative_and_above_quadratic(g in -10.0..10.0f64, x in -5.0..5.0f64, gm in gamma(), p in psi()) {
        let s = prox_step(g, x, gm, &p).unwrap();
        prop_assert!(s.w_hat >= -slack(s.w_hat));
        prop_assert!(s.w_hat >= 0.5 * gm * s.d_hat * s.d_hat - slack(s.w_hat));
    }

    #[test]
    fn w_hat_is_value_at_d_hat(g in -10.0..10.0f64, x in -5.0..5.0f64, gm in gamma(), p in psi()) {
        let s = prox_step(g, x, gm, &p).unwrap();
        let w = w_value(s.d_hat, g, x, gm, &p).unwrap();
        prop_assert!((w - s.w_hat).abs() <= slack(w));
    }

    #[test]
    fn d_hat_maximizes(g in -10.0..10.0f64, x in -5.0..5.0f64, gm in gamma(), p in psi(), d in -20.0..20.0f64) {
        let s = prox_step(g, x, gm, &p).unwrap();
        prop_assert!(s.w_hat >= w_value(d, g, x, gm, &p).unwrap() - slack(s.w_hat));
    }

    #[test]
    fn nonexpansive(g1 in -10.0..10.0f64, g2 in -10.0..10.0f64, x in -5.0..5.0f64, gm in gamma(), p in psi()) {
        let a = prox_step(g1, x, gm, &p).unwrap().d_hat;
        let b = prox_step(g2, x, gm, &p).unwrap().d_hat;
        prop_assert!((a - b).abs() <= (g1 - g2).abs() / gm + 1e-12);
    }

    #[test]
    fn w_shift(g1 in -10.0..10.0f64, g2 in -10.0..10.0f64, x in -5.0..5.0f64, gm in gamma(), p in psi()) {
        let a = prox_step(g1, x, gm, &p).unwrap().w_hat;
        let b = prox_step(g2, x, gm, &p).unwrap().w_hat;
        let rhs = 2.0 / 3.0 * b - 4.0 / (3.0 * gm) * (g1 - g2).powi(2);
        prop_assert!(a >= rhs - slack(a.abs().max(b.abs())));
    }

    #[test]
    fn partial_step(g in -10.0..10.0f64, x in -5.0..5.0f64, gm in gamma(), p in psi(), s in 0.0..=1.0f64) {
        let st = prox_step(g, x, gm, &p).unwrap();
        let w = w_value(s * st.d_hat, g, x, gm, &p).unwrap();
        prop_assert!(w >= s * st.w_hat - slack(st.w_hat));
    }

    #[test]
    fn monotone_in_gamma(g in -10.0..10.0f64, x in -5.0..5.0f64, gm in gamma(), f in 1.0..10.0f64, p in psi()) {
        let a = prox_step(g, x, gm, &p).unwrap().w_hat;
        let b = prox_step(g, x, gm * f, &p).unwrap().w_hat;
        prop_assert!(a >= b - slack(a));
    }

    #[test]
    fn closed_form_matches_oracle(g in -10.0..10.0f64, x in -5.0..5.0f64, gm in gamma(), p in psi()) {
        let a = prox_step(g, x, gm, &p).unwrap();
        let b = prox_oracle(g, x, gm, &p);
        prop_assert!((a.w_hat - b.w_hat).abs() <= 1e-6, "{a:?} {b:?}");
        prop_assert!((a.d_hat - b.d_hat).abs() <= 1e-4, "{a:?} {b:?}");
    }

    #[test]
    fn all_lemma_checks_hold(
        g in -10.0..10.0f64,
        g2 in -10.0..10.0f64,
        x in -5.0..5.0f64,
        gm in gamma(),
        f in 1.0..10.0f64,
        p in psi(),
        s in 0.0..=1.0f64,
        anchor in -5.0..5.0f64,
        probe in -5.0..5.0f64,
    ) {
        let t = LemmaTuple { g, g2, x, gamma: gm, gamma_big: gm * f, psi: p, s, anchor, probe };
        for c in lemma_checks(&t) {
            prop_assert!(c.holds(), "{} {c:?} {t:?}", c.name);
        }
    }
}

#[test]
fn rejects_bad_step_parameter() {
    for gm in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(prox_step(1.0, 0.0, gm, &PsiSpec::Zero).is_err());
    }
    assert!(PsiSpec::abs(-1.0).is_err());
    assert!(PsiSpec::quadratic(-1.0, 0.0).is_err());
}
