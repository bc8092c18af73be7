use crate::engine::{EngineKind, Trace};
use crate::error::{AcdError, Result};
use crate::problems::CompositeProblem;
use crate::prox::{d_hat_unchecked, prox_unchecked};
use crate::tolerances::TOLERANCES;

use super::report::Report;

/// Serialized commit-order view of a trace. Index `t - 1` holds quantities of
/// update `t`; `f` has one extra leading entry for `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySeries {
    pub engine: EngineKind,
    pub n: usize,
    pub f: Vec<f64>,
    /// `F(x^{t-1}) - F(x^t)` from local quantities (more accurate than differencing `f`).
    pub decrease: Vec<f64>,
    pub coord: Vec<usize>,
    pub gamma: Vec<f64>,
    /// Accurate partial gradient at the pre-update state.
    pub grad: Vec<f64>,
    pub grad_err_sq: Vec<f64>,
    /// Proximal progress of the updated coordinate at the accurate gradient.
    pub w_hat: Vec<f64>,
    pub dx: Vec<f64>,
    pub dx_sq: Vec<f64>,
    /// Updates whose recorded step differs from the rule applied to `g_tilde`.
    pub rule_violations: u64,
    pub final_x: Vec<f64>,
}

impl ReplaySeries {
    pub fn len(&self) -> usize {
        self.dx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dx.is_empty()
    }

    pub fn initial_value(&self) -> f64 {
        self.f[0]
    }
}

/// Applies the steps in commit order from `x0`, recomputing the objective and the
/// accurate gradient before each update.
pub fn replay_objective(problem: &CompositeProblem, trace: &Trace) -> Result<ReplaySeries> {
    let n = problem.dim();
    if trace.x0.len() != n || trace.final_x.len() != n {
        return Err(AcdError::CorruptTrace(format!("trace dimension {} vs problem {n}", trace.x0.len())));
    }
    trace.check_dense()?;
    let t_len = trace.len();
    let mut x = trace.x0.clone();
    let mut mx = vec![0.0; n];
    problem.hessian.mul_vec(&x, &mut mx);
    let mut s = ReplaySeries {
        engine: trace.engine,
        n,
        f: Vec::with_capacity(t_len + 1),
        decrease: Vec::with_capacity(t_len),
        coord: Vec::with_capacity(t_len),
        gamma: Vec::with_capacity(t_len),
        grad: Vec::with_capacity(t_len),
        grad_err_sq: Vec::with_capacity(t_len),
        w_hat: Vec::with_capacity(t_len),
        dx: Vec::with_capacity(t_len),
        dx_sq: Vec::with_capacity(t_len),
        rule_violations: 0,
        final_x: Vec::new(),
    };
    let mut f = problem.value(&x);
    s.f.push(f);
    for (i, r) in trace.records.iter().enumerate() {
        let k = r.k;
        if k >= n {
            return Err(AcdError::CorruptTrace(format!("update {} touches coordinate {k}", r.t)));
        }
        let psi = &problem.psi[k];
        let xk = x[k];
        let g = mx[k] - problem.linear[k];
        if d_hat_unchecked(r.g_tilde, xk, r.gamma, psi) != r.delta {
            s.rule_violations += 1;
        }
        let d = r.delta;
        let mkk = problem.hessian.entry(k, k);
        let df = d * g + 0.5 * d * d * mkk + psi.eval(xk + d) - psi.eval(xk);
        x[k] = xk + d;
        problem.hessian.for_row(k, |j, v| mx[j] += v * d);
        // Resynchronize once per pass to keep the running sums from drifting.
        if (i + 1) % n == 0 {
            problem.hessian.mul_vec(&x, &mut mx);
            f = problem.value(&x);
        } else {
            f += df;
        }
        s.f.push(f);
        s.decrease.push(-df);
        s.coord.push(k);
        s.gamma.push(r.gamma);
        s.grad.push(g);
        s.grad_err_sq.push((g - r.g_tilde) * (g - r.g_tilde));
        s.w_hat.push(prox_unchecked(g, xk, r.gamma, psi).w_hat);
        s.dx.push(d);
        s.dx_sq.push(d * d);
    }
    let drift = x.iter().zip(&trace.final_x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if !(drift <= TOLERANCES.replay_abs) {
        return Err(AcdError::CorruptTrace(format!("replayed state differs from final state by {drift}")));
    }
    s.final_x = x;
    Ok(s)
}

/// `(1/n) sum_k W_hat_k` at `x` with accurate gradients: the expected one-step
/// decrease of uniformly random descent.
pub fn mean_progress_bound(problem: &CompositeProblem, x: &[f64], gamma: f64) -> f64 {
    let n = problem.dim();
    (0..n)
        .map(|k| prox_unchecked(problem.partial(k, x), x[k], gamma, &problem.psi[k]).w_hat)
        .sum::<f64>()
        / n as f64
}

/// Per-update decrease audits.
///
/// Every update: `decrease >= W_hat/2 + gamma dx^2/8 - (g - g_tilde)^2 / gamma` and
/// `decrease >= gamma dx^2/2 - |g - g_tilde||dx|`. Updates with exact gradients
/// (all updates of the sequential engines) also get `decrease >= W_hat/2 + gamma dx^2/4` and `decrease >= W_hat`.
/// Only the worst margin of each family is listed.
pub fn progress_audit(replay: &ReplaySeries) -> Report {
    let slack = TOLERANCES.progress_abs * replay.initial_value().abs().max(1.0);
    let mut rep = Report::new("per-update progress");
    let mut worst: [Option<(f64, f64, usize)>; 5] = [None; 5];
    let mut note = |slot: usize, lhs: f64, rhs: f64, t: usize| {
        if worst[slot].map_or(true, |(l, r, _)| lhs - rhs < l - r) {
            worst[slot] = Some((lhs, rhs, t));
        }
    };
    // Sequential engines read exact gradients; any recorded difference is rounding.
    let sequential = matches!(replay.engine, EngineKind::Ccd | EngineKind::Scd);
    for t in 0..replay.len() {
        let (dec, w, g2, dx2, gam) =
            (replay.decrease[t], replay.w_hat[t], replay.grad_err_sq[t], replay.dx_sq[t], replay.gamma[t]);
        note(0, dec, 0.5 * w + 0.125 * gam * dx2 - g2 / gam, t);
        note(1, dec, 0.5 * gam * dx2 - g2.sqrt() * dx2.sqrt(), t);
        if sequential || g2 == 0.0 {
            note(2, dec, 0.5 * w + 0.25 * gam * dx2, t);
            note(3, dec, w, t);
            note(4, dec, 0.0, t);
        }
    }
    let names = ["mixed_progress", "stale_quadratic_progress", "exact_progress", "exact_w_hat", "monotone"];
    for (name, w) in names.iter().zip(worst) {
        if let Some((lhs, rhs, t)) = w {
            rep.check(format!("{name}@{}", t + 1), lhs, rhs, slack);
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ccd_solve_from, UpdateRecord};
    use crate::problems::{make_ridge, Hessian};
    use crate::prox::PsiSpec;

    #[test]
    fn two_point_series() {
        let p = CompositeProblem::quadratic(Hessian::dense(1, vec![1.0]).unwrap(), vec![0.0], 0.0, vec![PsiSpec::Zero])
            .unwrap();
        let tr = ccd_solve_from(&p, &[1.0], 1.0, 1).unwrap();
        let r = replay_objective(&p, &tr).unwrap();
        assert_eq!(r.f, vec![0.5, 0.0]);
        assert_eq!(r.grad_err_sq, vec![0.0]);
        assert_eq!(r.rule_violations, 0);
    }

    #[test]
    fn stale_read_error_is_cross_term() {
        // Worker A reads at counter 0 and commits second; B's first commit moved x_1.
        let m = vec![2.0, 0.5, 0.5, 3.0];
        let p = CompositeProblem::quadratic(Hessian::dense(2, m).unwrap(), vec![1.0, 1.0], 0.0, vec![PsiSpec::Zero; 2])
            .unwrap();
        let gamma = 4.0;
        let g1 = -1.0;
        let d1 = -g1 / gamma;
        let g0 = -1.0; // computed at x = 0, before B's commit
        let d0 = -g0 / gamma;
        let recs = vec![
            UpdateRecord { t: 1, k: 1, delta: d1, g_tilde: g1, gamma, started_snapshot: 0, ns: 0 },
            UpdateRecord { t: 2, k: 0, delta: d0, g_tilde: g0, gamma, started_snapshot: 0, ns: 0 },
        ];
        let tr = Trace::from_records(vec![0.0; 2], gamma, recs).unwrap();
        let r = replay_objective(&p, &tr).unwrap();
        assert_eq!(r.grad_err_sq[0], 0.0);
        assert!((r.grad_err_sq[1] - (0.5 * d1) * (0.5 * d1)).abs() < 1e-15);
        assert_eq!(r.rule_violations, 0);
    }

    #[test]
    fn checkpoints_match_direct_evaluation() {
        let p = make_ridge(9, 4, 0.2).unwrap();
        let tr = crate::engine::scd_solve(&p, 3.0, 400, 1).unwrap();
        let r = replay_objective(&p, &tr).unwrap();
        let mut x = tr.x0.clone();
        for (t, rec) in tr.records.iter().enumerate() {
            x[rec.k] += rec.delta;
            if t % 37 == 0 {
                let direct = p.value(&x);
                assert!((r.f[t + 1] - direct).abs() <= 1e-9 * direct.abs().max(1.0));
            }
        }
        assert!(progress_audit(&r).passed());
    }

    #[test]
    fn tampered_trace_detected() {
        let p = make_ridge(4, 4, 0.2).unwrap();
        let mut tr = ccd_solve_from(&p, &[0.0; 4], 3.0, 2).unwrap();
        tr.records[3].delta += 1e-3;
        assert!(matches!(replay_objective(&p, &tr), Err(AcdError::CorruptTrace(_))));
        let mut tr = ccd_solve_from(&p, &[0.0; 4], 3.0, 2).unwrap();
        tr.records[3].g_tilde += 1e-3;
        assert_eq!(replay_objective(&p, &tr).unwrap().rule_violations, 1);
    }
}
