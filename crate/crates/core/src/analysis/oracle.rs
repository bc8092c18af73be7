use crate::prox::{w_unchecked, ProxStep, PsiSpec};

/// Brute-force maximizer of the proximal function: a coarse grid to bracket the
/// peak, then golden-section search. Independent of the closed forms.
pub fn prox_oracle(g: f64, x: f64, gamma: f64, psi: &PsiSpec) -> ProxStep {
    let w = |d: f64| w_unchecked(d, g, x, gamma, psi);
    // Any subgradient s of psi at x gives |d_hat| <= |g + s| / gamma; difference
    // quotients over a unit step bound |s| for convex psi.
    let slope = (psi.eval(x + 1.0) - psi.eval(x)).abs().max((psi.eval(x) - psi.eval(x - 1.0)).abs());
    let reach = (g.abs() + slope) / gamma * 1.01 + 1e-12;
    let cells = 400;
    let h = 2.0 * reach / cells as f64;
    let mut best = 0;
    let mut best_w = f64::NEG_INFINITY;
    for i in 0..=cells {
        let v = w(-reach + i as f64 * h);
        if v > best_w {
            best_w = v;
            best = i;
        }
    }
    let mut lo = -reach + (best as f64 - 1.0) * h;
    let mut hi = -reach + (best as f64 + 1.0) * h;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut wa, mut wb) = (w(a), w(b));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * reach.max(1.0) {
            break;
        }
        if wa < wb {
            lo = a;
            a = b;
            wa = wb;
            b = lo + phi * (hi - lo);
            wb = w(b);
        } else {
            hi = b;
            b = a;
            wb = wa;
            a = hi - phi * (hi - lo);
            wa = w(a);
        }
    }
    let d = 0.5 * (lo + hi);
    // W(0) = 0 is always feasible, and the grid may have hit a kink exactly.
    let cands = [(d, w(d)), (0.0, 0.0), (-reach + best as f64 * h, best_w)];
    let (d_hat, w_hat) = cands.into_iter().fold((0.0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    ProxStep { d_hat, w_hat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::prox_step;

    #[test]
    fn agrees_with_closed_forms() {
        let cases = [
            (1.0, 0.0, 1.0, PsiSpec::Zero),
            (0.5, 0.0, 1.0, PsiSpec::AbsWeighted(1.0)),
            (3.0, 0.2, 2.0, PsiSpec::AbsWeighted(1.0)),
            (-2.0, 1.0, 4.0, PsiSpec::Quadratic { a: 2.0, b: -1.0 }),
            (-0.3, -0.1, 1.5, PsiSpec::HingeWeighted(2.0)),
        ];
        for (g, x, gamma, psi) in cases {
            let a = prox_step(g, x, gamma, &psi).unwrap();
            let b = prox_oracle(g, x, gamma, &psi);
            assert!((a.d_hat - b.d_hat).abs() < 1e-6, "{psi:?}: {a:?} vs {b:?}");
            assert!((a.w_hat - b.w_hat).abs() < 1e-9);
        }
    }
}
