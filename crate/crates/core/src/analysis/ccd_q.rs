use crate::error::{AcdError, Result};
use crate::problems::CompositeProblem;

use super::replay::ReplaySeries;

/// Window quantity of cyclic descent over commits `t-2n+1..=t`:
/// `(gamma/4) sum dx_i^2 - 2/(3 gamma n) sum_i sum_j (g^j_{k_i} - g^i_{k_i})^2`
/// with `j` over the last `n` commits before `i` inside the window.
///
/// Gradient differences come from the Hessian column of `k_i` applied to the
/// intervening steps, so nothing beyond the replayed steps is stored.
pub fn ccd_q_diagnostic(problem: &CompositeProblem, replay: &ReplaySeries, t: usize, gamma: f64) -> Result<f64> {
    let n = replay.n;
    if problem.dim() != n {
        return Err(AcdError::invalid("problem and replay dimensions differ"));
    }
    if !(gamma > 0.0) {
        return Err(AcdError::invalid("step parameter must be positive"));
    }
    if t < 2 * n || t > replay.len() {
        return Err(AcdError::invalid(format!("window end {t} outside [{}, {}]", 2 * n, replay.len())));
    }
    if replay.coord.iter().enumerate().any(|(i, &k)| k != i % n) {
        return Err(AcdError::Unsupported(format!(
            "window quantity needs a cyclic trace, got {} order",
            replay.engine.name()
        )));
    }
    let start = t - 2 * n + 1;
    let dx = |i: usize| replay.dx[i - 1];
    let k_of = |i: usize| replay.coord[i - 1];
    let mut steps = 0.0;
    let mut errs = 0.0;
    for i in start..=t {
        steps += dx(i) * dx(i);
        let ki = k_of(i);
        let lo = start.max((i + 1).saturating_sub(n));
        let mut diff = 0.0;
        for j in (lo..i).rev() {
            diff -= problem.hessian.entry(ki, k_of(j)) * dx(j);
            errs += diff * diff;
        }
    }
    Ok(gamma / 4.0 * steps - 2.0 / (3.0 * gamma * n as f64) * errs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::replay_objective;
    use crate::engine::{ccd_solve, scd_solve};
    use crate::problems::make_ridge;

    #[test]
    fn stationary_window_is_zero() {
        let p = make_ridge(4, 1, 1.0).unwrap();
        let opt = p.optimum.clone().unwrap().x;
        let tr = crate::engine::ccd_solve_from(&p, &opt, 10.0, 3).unwrap();
        let r = replay_objective(&p, &tr).unwrap();
        let q = ccd_q_diagnostic(&p, &r, 8, 10.0).unwrap();
        assert!(q.abs() < 1e-20, "{q}");
    }

    #[test]
    fn matches_brute_force_gradients() {
        let p = make_ridge(3, 5, 0.2).unwrap();
        let gamma = 0.7;
        let tr = ccd_solve(&p, gamma, 4).unwrap();
        let r = replay_objective(&p, &tr).unwrap();
        let t = 9;
        let n = 3;
        let mut brute = 0.0;
        let mut steps = 0.0;
        for i in t - 2 * n + 1..=t {
            steps += r.dx_sq[i - 1];
            let ki = r.coord[i - 1];
            for j in (t - 2 * n + 1).max(i + 1 - n)..=i {
                // grad at x^{j-1} minus grad at x^{i-1}, both for coordinate k_i
                let mut xj = tr.x0.clone();
                for rec in &tr.records[..j - 1] {
                    xj[rec.k] += rec.delta;
                }
                let gi = r.grad[i - 1];
                let d = p.partial(ki, &xj) - gi;
                brute += d * d;
            }
        }
        let want = gamma / 4.0 * steps - 2.0 / (3.0 * gamma * 3.0) * brute;
        let got = ccd_q_diagnostic(&p, &r, t, gamma).unwrap();
        assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn random_order_rejected() {
        let p = make_ridge(4, 1, 1.0).unwrap();
        let r = replay_objective(&p, &scd_solve(&p, 5.0, 40, 3).unwrap()).unwrap();
        assert!(matches!(ccd_q_diagnostic(&p, &r, 8, 5.0), Err(AcdError::Unsupported(_))));
    }
}
