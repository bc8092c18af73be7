use crate::error::{AcdError, Result};
use crate::step_size::{theoretical_rate, RateParams};
use crate::tolerances::TOLERANCES;

use super::amortized::amortized_h_series;
use super::replay::ReplaySeries;
use super::report::Report;

/// Sums of `h[i] - f_star` over consecutive non-overlapping blocks of length `w`.
pub fn block_sums(h: &[f64], f_star: f64, w: usize) -> Vec<f64> {
    h.chunks_exact(w.max(1)).map(|c| c.iter().map(|v| v - f_star).sum()).collect()
}

/// Ratios of consecutive block sums; blocks at or below `floor` are dropped.
pub fn block_contractions(h: &[f64], f_star: f64, w: usize, floor: f64) -> Vec<f64> {
    let s = block_sums(h, f_star, w);
    s.windows(2).filter(|p| p[0] > floor).map(|p| p[1] / p[0]).collect()
}

/// Compares the observed contraction of the amortized potential over blocks of
/// `2r` commits with `rho^(2r)`, where `rho` is the guaranteed per-commit rate.
///
/// Blocks whose potential gap sum is within the noise floor count as vacuous.
pub fn rate_audit(replay: &ReplaySeries, params: &RateParams, r: u64, f_star: f64) -> Result<Report> {
    if r == 0 {
        return Err(AcdError::invalid("round length must be >= 1"));
    }
    let rho = theoretical_rate(params)?;
    let series = amortized_h_series(replay, params.gamma, params.q);
    let w = 2 * r as usize;
    let allowed = rho.powi(w as i32);
    let f0 = replay.initial_value();
    let floor = w as f64 * TOLERANCES.progress_abs * f0.abs().max(f_star.abs()).max(1.0);
    let sums = block_sums(&series.h, f_star, w);
    let mut rep = Report::new(format!("rate audit rho={rho:?} block={w} allowed={allowed:?}"));
    let mut vacuous = 0;
    for (b, pair) in sums.windows(2).enumerate() {
        if pair[0] <= floor {
            vacuous += 1;
            continue;
        }
        rep.check(format!("block_contraction@{}", (b + 2) * w), allowed * pair[0], pair[1], floor);
    }
    let worst = sums
        .windows(2)
        .filter(|p| p[0] > floor)
        .map(|p| p[1] / p[0])
        .fold(f64::NEG_INFINITY, f64::max);
    rep.note(format!("blocks = {} vacuous = {vacuous}", sums.len().saturating_sub(1)));
    if worst.is_finite() {
        rep.note(format!("worst observed contraction = {worst:?}"));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::replay_objective;
    use crate::engine::ccd_solve;
    use crate::problems::make_ridge;
    use crate::step_size::{alpha_ccd, gamma_ccd};

    #[test]
    fn ccd_beats_bound() {
        let p = make_ridge(16, 3, 0.5).unwrap();
        let gamma = gamma_ccd(p.lipschitz.global, 16).unwrap();
        let r = replay_objective(&p, &ccd_solve(&p, gamma, 40).unwrap()).unwrap();
        let (mu_f, mu_big) = p.strong_convexity();
        let params = RateParams { alpha: alpha_ccd(), beta: None, n: 16, q: 0, gamma, mu_big, mu_smooth: mu_f };
        let rep = rate_audit(&r, &params, 16, p.optimum.as_ref().unwrap().value).unwrap();
        assert!(rep.passed(), "{rep}");
        assert!(rep.assertions.len() >= 10);
    }

    #[test]
    fn converged_run_is_vacuous() {
        let p = make_ridge(4, 3, 0.5).unwrap();
        let opt = p.optimum.clone().unwrap();
        let tr = crate::engine::ccd_solve_from(&p, &opt.x, 8.0, 10).unwrap();
        let r = replay_objective(&p, &tr).unwrap();
        let params = RateParams { alpha: 1.0 / 3.0, beta: None, n: 4, q: 0, gamma: 8.0, mu_big: 0.5, mu_smooth: 0.0 };
        let rep = rate_audit(&r, &params, 4, opt.value).unwrap();
        assert!(rep.passed());
        assert!(rep.assertions.is_empty());
    }

    #[test]
    fn block_helpers() {
        let h = [4.0, 4.0, 2.0, 2.0, 1.0, 1.0, 0.0];
        assert_eq!(block_sums(&h, 0.0, 2), vec![8.0, 4.0, 2.0]);
        assert_eq!(block_contractions(&h, 0.0, 2, 0.0), vec![0.5, 0.5]);
    }
}
