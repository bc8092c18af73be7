//! Continuous-time asynchronous price updates as a discrete-event loop.
//!
//! Each seller updates on a jittered periodic schedule. Prices are constant
//! between events, so the excess demand a seller saw since its last update is a
//! step function and its minimum, maximum and average are exact.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AcdError, Result};

use super::{default_tol_price, excess_demand, phi, residual_from, FisherMarket};

/// Largest step factor covered by the convergence guarantee.
pub const MAX_GUARANTEED_LAMBDA: f64 = 1.0 / 37.0;

/// How a seller summarizes the excess demand observed since its last update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZStatistic {
    #[default]
    TimeWeightedAverage,
    RandomInstant,
    LatestInstant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TatonnementConfig {
    pub lambda: f64,
    /// Simulated days.
    pub horizon: f64,
    pub statistic: ZStatistic,
    pub seed: u64,
    pub period_min: f64,
    pub period_max: f64,
    /// Relative per-event perturbation of each seller's period.
    pub jitter: f64,
    /// Permit `lambda` above the guaranteed range (for experiments).
    pub allow_large_step: bool,
}

impl Default for TatonnementConfig {
    fn default() -> Self {
        TatonnementConfig {
            lambda: MAX_GUARANTEED_LAMBDA,
            horizon: 500.0,
            statistic: ZStatistic::default(),
            seed: 0,
            period_min: 0.5,
            period_max: 1.0,
            jitter: 0.1,
            allow_large_step: false,
        }
    }
}

impl TatonnementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(AcdError::invalid(format!("step factor must lie in (0, 1), got {}", self.lambda)));
        }
        if self.lambda > MAX_GUARANTEED_LAMBDA && !self.allow_large_step {
            return Err(AcdError::invalid(format!(
                "step factor {} exceeds 1/37; set allow_large_step to run anyway",
                self.lambda
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(AcdError::invalid("horizon must be positive"));
        }
        if !(self.period_min > 0.0 && self.period_min <= self.period_max && self.period_max <= 1.0) {
            return Err(AcdError::invalid("seller periods must satisfy 0 < min <= max <= 1"));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(AcdError::invalid("jitter must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceEvent {
    pub t: f64,
    pub good: usize,
    pub dt: f64,
    pub p_before: f64,
    pub p_after: f64,
    pub z_tilde: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub phi_after: f64,
    pub residual_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceTrace {
    pub lambda: f64,
    pub horizon: f64,
    pub statistic: ZStatistic,
    pub tol_price: f64,
    pub p0: Vec<f64>,
    pub phi0: f64,
    pub residual0: f64,
    pub final_prices: Vec<f64>,
    pub events: Vec<PriceEvent>,
}

impl PriceTrace {
    pub fn final_residual(&self) -> f64 {
        self.events.last().map_or(self.residual0, |e| e.residual_after)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    t: f64,
    good: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t.total_cmp(&other.t).then(self.good.cmp(&other.good))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Summary of a step function given as `(start, value)` pieces ending at `end`.
struct Interval {
    min: f64,
    max: f64,
    average: f64,
    latest: f64,
}

fn summarize(pieces: &[(f64, f64)], end: f64) -> Interval {
    let (mut min, mut max, mut area) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for (i, &(s, v)) in pieces.iter().enumerate() {
        let e = pieces.get(i + 1).map_or(end, |p| p.0);
        if e > s || pieces.len() == 1 {
            min = min.min(v);
            max = max.max(v);
            area += (e - s) * v;
        }
    }
    let span = end - pieces[0].0;
    let latest = pieces.last().map_or(0.0, |p| p.1);
    if !min.is_finite() {
        // Every piece was instantaneous; only the latest value was ever in force.
        return Interval { min: latest, max: latest, average: latest, latest };
    }
    let average = if span > 0.0 { area / span } else { latest };
    Interval { min, max, average, latest }
}

fn value_at(pieces: &[(f64, f64)], s: f64) -> f64 {
    let idx = pieces.partition_point(|p| p.0 <= s).max(1);
    pieces[idx - 1].1
}

pub fn async_tatonnement_run(market: &FisherMarket, p0: &[f64], config: &TatonnementConfig) -> Result<PriceTrace> {
    config.validate()?;
    let n = market.goods;
    let mut p = p0.to_vec();
    let mut z = excess_demand(market, &p)?;
    let tol_price = default_tol_price(p0);
    let phi0 = phi(market, &p)?;
    let residual0 = residual_from(&z, &p, tol_price);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let base: Vec<f64> = (0..n)
        .map(|_| if config.period_min < config.period_max { rng.gen_range(config.period_min..=config.period_max) } else { config.period_min })
        .collect();
    let mut heap = BinaryHeap::with_capacity(n);
    for (j, b) in base.iter().enumerate() {
        heap.push(Reverse(Event { t: b * (1.0 - rng.gen::<f64>()), good: j }));
    }
    let mut last = vec![0.0; n];
    let mut pieces: Vec<Vec<(f64, f64)>> = z.iter().map(|&v| vec![(0.0, v)]).collect();
    let mut events = Vec::new();

    while let Some(Reverse(ev)) = heap.pop() {
        if ev.t > config.horizon {
            break;
        }
        let j = ev.good;
        let t = ev.t;
        let dt = t - last[j];
        let iv = summarize(&pieces[j], t);
        let raw = match config.statistic {
            ZStatistic::TimeWeightedAverage => iv.average,
            ZStatistic::LatestInstant => iv.latest,
            ZStatistic::RandomInstant => value_at(&pieces[j], last[j] + rng.gen::<f64>() * dt),
        };
        let tol = 1e-12 * iv.min.abs().max(iv.max.abs()).max(1.0);
        if !(raw >= iv.min - tol && raw <= iv.max + tol) {
            return Err(AcdError::Enforcement(format!(
                "observed excess demand {raw} for good {j} outside [{}, {}] at t={t}",
                iv.min, iv.max
            )));
        }
        // Rounding in the average can leave it an ulp outside the observed range.
        let z_tilde = raw.clamp(iv.min, iv.max);
        let before = p[j];
        let after = before * (1.0 + config.lambda * z_tilde.min(1.0) * dt);
        if !(after > 0.0 && after.is_finite()) {
            return Err(AcdError::Domain(format!("price of good {j} became {after} at t={t}")));
        }
        p[j] = after;
        z = excess_demand(market, &p)?;
        for (l, list) in pieces.iter_mut().enumerate() {
            if l == j {
                list.clear();
            }
            list.push((t, z[l]));
        }
        last[j] = t;
        events.push(PriceEvent {
            t,
            good: j,
            dt,
            p_before: before,
            p_after: after,
            z_tilde,
            z_min: iv.min,
            z_max: iv.max,
            phi_after: phi(market, &p)?,
            residual_after: residual_from(&z, &p, tol_price),
        });
        let factor = 1.0 + rng.gen_range(-config.jitter..=config.jitter);
        heap.push(Reverse(Event { t: t + (base[j] * factor).min(1.0), good: j }));
    }
    Ok(PriceTrace {
        lambda: config.lambda,
        horizon: config.horizon,
        statistic: config.statistic,
        tol_price,
        p0: p0.to_vec(),
        phi0,
        residual0,
        final_prices: p,
        events,
    })
}

/// Columns `t,j,p_before,p_after,z_tilde,z_min,z_max`.
pub fn format_price_trace(trace: &PriceTrace) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# lambda = {:?}", trace.lambda);
    let _ = writeln!(s, "# horizon = {:?}", trace.horizon);
    let _ = writeln!(s, "# statistic = {:?}", trace.statistic);
    let _ = writeln!(s, "# p0 = {}", trace.p0.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" "));
    s.push_str("t,j,p_before,p_after,z_tilde,z_min,z_max\n");
    for e in &trace.events {
        let _ = writeln!(
            s,
            "{:?},{},{:?},{:?},{:?},{:?},{:?}",
            e.t, e.good, e.p_before, e.p_after, e.z_tilde, e.z_min, e.z_max
        );
    }
    s
}

/// Columns `t,phi,residual`, starting with the initial prices.
pub fn format_series(trace: &PriceTrace) -> String {
    let mut s = String::from("t,phi,residual\n");
    let _ = writeln!(s, "0.0,{:?},{:?}", trace.phi0, trace.residual0);
    for e in &trace.events {
        let _ = writeln!(s, "{:?},{:?},{:?}", e.t, e.phi_after, e.residual_after);
    }
    s
}
