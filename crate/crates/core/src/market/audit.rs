use crate::analysis::Report;
use crate::error::{AcdError, Result};

use super::{excess_demand, FisherMarket, PriceTrace};

/// Compares the step parameter each update implies,
/// `max(z_tilde, 1) / (lambda p_before)`, with the demand-side requirement
/// `16.5 x_j(p) / p_before` at the prices in force just before the update.
pub fn step_size_audit(trace: &PriceTrace, market: &FisherMarket) -> Result<Report> {
    if !market.is_ces() {
        return Err(AcdError::Unsupported("step-size audit covers CES markets only".into()));
    }
    let mut p = trace.p0.clone();
    let mut rep = Report::new(format!("tatonnement step size lambda={:?}", trace.lambda));
    let mut worst: Option<(f64, f64, usize)> = None;
    let mut negative = 0usize;
    for (i, e) in trace.events.iter().enumerate() {
        if e.good >= p.len() || p[e.good].to_bits() != e.p_before.to_bits() {
            return Err(AcdError::CorruptTrace(format!("event {i} does not continue the price path")));
        }
        let x = excess_demand(market, &p)?[e.good] + 1.0;
        let implied = e.z_tilde.max(1.0) / (trace.lambda * e.p_before);
        let needed = 16.5 * x / e.p_before;
        if implied < needed {
            negative += 1;
        }
        if worst.map_or(true, |(a, b, _)| implied - needed < a - b) {
            worst = Some((implied, needed, i));
        }
        p[e.good] = e.p_after;
    }
    if let Some((implied, needed, i)) = worst {
        rep.check(format!("implied_step_covers_demand@{}", i + 1), implied, needed, 0.0);
    }
    rep.note(format!("updates = {} negative_margins = {negative}", trace.events.len()));
    Ok(rep)
}

/// Potential non-increase at update instants and observed-statistic range checks.
pub fn potential_report(trace: &PriceTrace) -> Report {
    let slack = 1e-8 * trace.phi0.abs();
    let mut rep = Report::new("tatonnement potential");
    let mut prev = trace.phi0;
    let mut worst = (0usize, f64::NEG_INFINITY);
    for (i, e) in trace.events.iter().enumerate() {
        let up = e.phi_after - prev;
        if up > worst.1 {
            worst = (i + 1, up);
        }
        prev = e.phi_after;
    }
    if !trace.events.is_empty() {
        rep.check(format!("potential_nonincreasing@{}", worst.0), 0.0, worst.1, slack);
    }
    let outside = trace.events.iter().filter(|e| !(e.z_min <= e.z_tilde && e.z_tilde <= e.z_max)).count();
    rep.check("observed_within_interval", 0.0, outside as f64, 0.0);
    let nonpositive = trace.events.iter().filter(|e| !(e.p_after > 0.0)).count();
    rep.check("prices_positive", 0.0, nonpositive as f64, 0.0);
    rep
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTrend {
    /// Largest residual in each equal-time bin of the tail.
    pub bin_max: Vec<f64>,
    /// Least-squares slope of `ln residual` against time over the tail.
    pub log_slope: f64,
    pub decreasing: bool,
}

/// Splits the last `tail` fraction of the horizon into `bins` equal time bins
/// and asks that per-bin maxima never increase (bins already below `floor`
/// count as converged) and that the log-residual slope be negative.
pub fn residual_trend(trace: &PriceTrace, tail: f64, bins: usize, floor: f64) -> Result<ResidualTrend> {
    if !(tail > 0.0 && tail <= 1.0) || bins == 0 {
        return Err(AcdError::invalid("tail fraction must lie in (0, 1] and bins >= 1"));
    }
    let start = trace.horizon * (1.0 - tail);
    let width = trace.horizon * tail / bins as f64;
    let mut bin_max = vec![f64::NAN; bins];
    let (mut st, mut sy, mut stt, mut sty, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for e in trace.events.iter().filter(|e| e.t >= start) {
        let b = (((e.t - start) / width) as usize).min(bins - 1);
        bin_max[b] = if bin_max[b].is_nan() { e.residual_after } else { bin_max[b].max(e.residual_after) };
        if e.residual_after > 0.0 {
            let y = e.residual_after.ln();
            st += e.t;
            sy += y;
            stt += e.t * e.t;
            sty += e.t * y;
            m += 1.0;
        }
    }
    if bin_max.iter().any(|v| v.is_nan()) {
        return Err(AcdError::invalid("a tail bin has no updates"));
    }
    let denom = m * stt - st * st;
    let log_slope = if m >= 2.0 && denom > 0.0 { (m * sty - st * sy) / denom } else { 0.0 };
    let bins_ok = bin_max.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor);
    let converged = bin_max.iter().all(|&v| v <= floor);
    Ok(ResidualTrend { decreasing: bins_ok && (log_slope < 0.0 || converged), bin_max, log_slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{async_tatonnement_run, leontief_fixture, symmetric_ces_market, TatonnementConfig};

    #[test]
    fn guaranteed_step_has_nonnegative_margins() {
        let m = symmetric_ces_market();
        let tr = async_tatonnement_run(&m, &[1.0, 1.0], &TatonnementConfig { horizon: 100.0, ..Default::default() })
            .unwrap();
        let rep = step_size_audit(&tr, &m).unwrap();
        assert!(rep.passed(), "{rep}");
        assert!(potential_report(&tr).passed(), "{}", potential_report(&tr));
    }

    #[test]
    fn oversized_step_reports_negative_margins() {
        let m = symmetric_ces_market();
        let cfg = TatonnementConfig { lambda: 0.5, allow_large_step: true, horizon: 20.0, ..Default::default() };
        let tr = async_tatonnement_run(&m, &[1.0, 1.0], &cfg).unwrap();
        let rep = step_size_audit(&tr, &m).unwrap();
        assert!(!rep.passed());
        assert!(rep.assertions[0].margin() < 0.0);
    }

    #[test]
    fn leontief_rejected_by_step_audit() {
        let m = leontief_fixture();
        let tr = async_tatonnement_run(&m, &[1.0; 4], &TatonnementConfig { horizon: 5.0, ..Default::default() }).unwrap();
        assert!(matches!(step_size_audit(&tr, &m), Err(AcdError::Unsupported(_))));
    }
}
