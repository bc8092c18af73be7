//! Randomized checks of the scalar inequalities the convergence argument rests on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{AcdError, Result};
use crate::prox::{d_hat_unchecked, prox_unchecked, w_unchecked, PsiSpec};
use crate::tolerances::TOLERANCES;

use super::report::Report;

/// One random instance. `g2` is the perturbed gradient, `anchor` and `probe`
/// are the centre and comparison point of the three-point check, `gamma_big > gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaTuple {
    pub g: f64,
    pub g2: f64,
    pub x: f64,
    pub gamma: f64,
    pub gamma_big: f64,
    pub psi: PsiSpec,
    pub s: f64,
    pub anchor: f64,
    pub probe: f64,
}

/// A checked inequality `lhs >= rhs` with a magnitude used to scale the slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

impl LemmaCheck {
    pub fn slack(&self) -> f64 {
        TOLERANCES.lemma_rel * self.scale.max(1.0)
    }

    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs - self.slack()
    }

    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

pub const LEMMA_NAMES: [&str; 7] = [
    "w_hat_nonnegative",
    "w_shift",
    "w_hat_above_quadratic",
    "step_nonexpansive",
    "partial_step",
    "three_point",
    "gamma_monotone",
];

fn check(name: &'static str, lhs: f64, rhs: f64, terms: &[f64]) -> LemmaCheck {
    let scale = terms.iter().map(|v| v.abs()).fold(lhs.abs().max(rhs.abs()), f64::max);
    LemmaCheck { name, lhs, rhs, scale }
}

/// All inequalities for one tuple, in `LEMMA_NAMES` order.
pub fn lemma_checks(t: &LemmaTuple) -> [LemmaCheck; 7] {
    let (g, g2, x, gm, psi) = (t.g, t.g2, t.x, t.gamma, &t.psi);
    let p1 = prox_unchecked(g, x, gm, psi);
    let p2 = prox_unchecked(g2, x, gm, psi);
    let dg2 = (g - g2) * (g - g2);

    let shift_rhs = 2.0 / 3.0 * p2.w_hat - 4.0 / (3.0 * gm) * dg2;

    let w_partial = w_unchecked(t.s * p1.d_hat, g, x, gm, psi);

    // Y(d) = g d + psi(x+d) - psi(x); its prox around `anchor` is the prox step at g - gamma*anchor.
    let y = |d: f64| g * d + psi.eval(x + d) - psi.eval(x);
    let plus = d_hat_unchecked(g - gm * t.anchor, x, gm, psi);
    let half = 0.5 * gm;
    let tp_l = y(t.probe) + half * (t.probe - t.anchor).powi(2);
    let tp_r = y(plus) + half * (t.probe - plus).powi(2) + half * (plus - t.anchor).powi(2);

    let big = prox_unchecked(g, x, t.gamma_big, psi).w_hat;

    [
        check(LEMMA_NAMES[0], p1.w_hat, 0.0, &[g * p1.d_hat]),
        check(LEMMA_NAMES[1], p1.w_hat, shift_rhs, &[p2.w_hat, dg2 / gm]),
        check(LEMMA_NAMES[2], p1.w_hat, half * p1.d_hat * p1.d_hat, &[g * p1.d_hat]),
        check(LEMMA_NAMES[3], (g - g2).abs() / gm, (p1.d_hat - p2.d_hat).abs(), &[p1.d_hat, p2.d_hat]),
        check(LEMMA_NAMES[4], w_partial, t.s * p1.w_hat, &[g * p1.d_hat]),
        check(LEMMA_NAMES[5], tp_l, tp_r, &[y(t.probe), y(plus), g * t.probe, g * plus]),
        check(LEMMA_NAMES[6], p1.w_hat, big, &[g * p1.d_hat]),
    ]
}

fn random_psi(rng: &mut ChaCha8Rng) -> PsiSpec {
    match rng.gen_range(0..4) {
        0 => PsiSpec::Zero,
        1 => PsiSpec::AbsWeighted(rng.gen_range(0.0..3.0)),
        2 => PsiSpec::Quadratic { a: rng.gen_range(0.0..5.0), b: rng.gen_range(-3.0..3.0) },
        _ => PsiSpec::HingeWeighted(rng.gen_range(0.0..3.0)),
    }
}

/// Draws a tuple with log-uniform step parameters and Gaussian gradients.
pub fn random_tuple(rng: &mut ChaCha8Rng) -> LemmaTuple {
    let normal = Normal::new(0.0, 2.0).expect("valid normal");
    let gamma = 10f64.powf(rng.gen_range(-2.0..3.0));
    let spread = 1.0 + gamma;
    let g = normal.sample(rng) * spread;
    // Nearby perturbations exercise the tight regime; far ones the loose regime.
    let g2 = if rng.gen_bool(0.5) { g + normal.sample(rng) * 1e-3 * spread } else { normal.sample(rng) * spread };
    LemmaTuple {
        g,
        g2,
        x: normal.sample(rng),
        gamma,
        gamma_big: gamma * (1.0 + 10f64.powf(rng.gen_range(-3.0..1.0))),
        psi: random_psi(rng),
        s: match rng.gen_range(0..6) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen_range(0.0..1.0),
        },
        anchor: normal.sample(rng),
        probe: normal.sample(rng) * 2.0,
    }
}

/// Runs every check on `samples` random tuples. Each lemma gets one line with its
/// worst margin; each violation adds a line naming the offending tuple.
pub fn lemma_suite(seed: u64, samples: u64) -> Result<Report> {
    if samples == 0 {
        return Err(AcdError::invalid("samples must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Vec<Option<LemmaCheck>> = vec![None; LEMMA_NAMES.len()];
    let mut violations = Vec::new();
    for i in 0..samples {
        let tuple = random_tuple(&mut rng);
        for (slot, c) in lemma_checks(&tuple).into_iter().enumerate() {
            let rel = c.margin() / c.slack();
            if worst[slot].map_or(true, |w| rel < w.margin() / w.slack()) {
                worst[slot] = Some(c);
            }
            if !c.holds() {
                violations.push((i, c, tuple.clone()));
            }
        }
    }
    let mut rep = Report::new(format!("lemma suite seed={seed} samples={samples}"));
    for c in worst.into_iter().flatten() {
        rep.check(c.name, c.lhs, c.rhs, c.slack());
    }
    for (i, c, tuple) in violations.iter().take(50) {
        rep.note(format!("sample {i} violates {}: {tuple:?}", c.name));
    }
    rep.note(format!("violations = {}", violations.len()));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuple(g: f64, g2: f64, gamma: f64, s: f64) -> LemmaTuple {
        LemmaTuple { g, g2, x: 0.0, gamma, gamma_big: 2.0 * gamma, psi: PsiSpec::Zero, s, anchor: 0.3, probe: -1.0 }
    }

    #[test]
    fn smooth_shift_example() {
        let c = lemma_checks(&tuple(0.0, 1.0, 1.0, 0.5));
        assert_eq!(c[1].lhs, 0.0);
        assert!((c[1].rhs - (1.0 / 3.0 - 4.0 / 3.0)).abs() < 1e-15);
        assert!(c[1].holds());
    }

    #[test]
    fn partial_step_endpoints() {
        let c = lemma_checks(&tuple(2.0, 1.0, 1.0, 0.0));
        assert_eq!((c[4].lhs, c[4].rhs), (0.0, 0.0));
        let c = lemma_checks(&tuple(2.0, 1.0, 1.0, 1.0));
        assert_eq!(c[4].lhs, c[4].rhs);
    }

    #[test]
    fn suite_is_clean_and_deterministic() {
        let a = lemma_suite(11, 2000).unwrap();
        assert!(a.passed(), "{a}");
        assert_eq!(a.assertions.len(), LEMMA_NAMES.len());
        assert_eq!(a, lemma_suite(11, 2000).unwrap());
        assert!(lemma_suite(1, 0).is_err());
    }
}
