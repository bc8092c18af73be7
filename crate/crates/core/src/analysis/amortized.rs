use std::fmt::Write as _;

use crate::tolerances::TOLERANCES;

use super::replay::ReplaySeries;
use super::report::Report;

/// Objective plus a carry term charging the last `q` squared steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AmortizedSeries {
    pub gamma: f64,
    pub q: u64,
    /// `a[t]` for `t = 0..=T`.
    pub a: Vec<f64>,
    pub h: Vec<f64>,
    /// `h[t] - h[t-1]` from local decreases, index `t - 1`.
    pub h_step: Vec<f64>,
}

/// `A(t) = (gamma/16) sum_{tau=max(t-q,1)}^{t} ((tau+q)-t)/q * dx_tau^2`, zero when `q = 0`.
pub fn amortized_h_series(replay: &ReplaySeries, gamma: f64, q: u64) -> AmortizedSeries {
    let t_len = replay.len();
    let mut a = vec![0.0; t_len + 1];
    if q > 0 {
        let qf = q as f64;
        for (t, slot) in a.iter_mut().enumerate().skip(1) {
            let lo = t.saturating_sub(q as usize).max(1);
            let mut s = 0.0;
            for tau in lo..=t {
                s += (tau as f64 + qf - t as f64) / qf * replay.dx_sq[tau - 1];
            }
            *slot = gamma * s / 16.0;
        }
    }
    let h = replay.f.iter().zip(&a).map(|(f, a)| f + a).collect();
    let h_step = (1..=t_len).map(|t| -replay.decrease[t - 1] + a[t] - a[t - 1]).collect();
    AmortizedSeries { gamma, q, a, h, h_step }
}

impl AmortizedSeries {
    /// Largest single-step increase of `H` and where it happened (1-based).
    pub fn max_increase(&self) -> (usize, f64) {
        self.h_step
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i + 1, v) } else { best })
    }

    /// Asserts `A >= 0` and that `H` never increases by more than the slack.
    pub fn monotone_report(&self, initial_f: f64) -> Report {
        let slack = TOLERANCES.potential_rel * initial_f.abs().max(1.0);
        let mut rep = Report::new(format!("amortized potential gamma={:?} q={}", self.gamma, self.q));
        let a_min = self.a.iter().copied().fold(f64::INFINITY, f64::min);
        rep.check("carry_nonnegative", a_min, 0.0, 0.0);
        rep.check("carry_starts_at_zero", -self.a[0].abs(), 0.0, 0.0);
        if !self.h_step.is_empty() {
            let (t, up) = self.max_increase();
            rep.check(format!("potential_nonincreasing@{t}"), 0.0, up, slack);
        }
        rep
    }
}

/// Columns `t,F,H,A,grad_err_sq,dx_sq`; the `t = 0` row has zero step columns.
pub fn series_csv(replay: &ReplaySeries, series: &AmortizedSeries) -> String {
    let mut s = String::from("t,F,H,A,grad_err_sq,dx_sq\n");
    for t in 0..replay.f.len() {
        let (g2, d2) = if t == 0 { (0.0, 0.0) } else { (replay.grad_err_sq[t - 1], replay.dx_sq[t - 1]) };
        let _ = writeln!(s, "{t},{:?},{:?},{:?},{g2:?},{d2:?}", replay.f[t], series.h[t], series.a[t]);
    }
    s
}
