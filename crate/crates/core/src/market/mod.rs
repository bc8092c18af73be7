//! Fisher markets with unit supplies, complementary-CES and Leontief buyers,
//! and multiplicative price adjustment.

mod audit;
mod io;
mod tatonnement;

pub use audit::{potential_report, residual_trend, step_size_audit, ResidualTrend};
pub use io::{parse_market, read_market, write_market, MarketFile, RandomCes};
pub use tatonnement::{
    async_tatonnement_run, format_price_trace, format_series, PriceEvent, PriceTrace, TatonnementConfig, ZStatistic,
    MAX_GUARANTEED_LAMBDA,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AcdError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Utility {
    /// `(sum_l a_l x_l^rho)^(1/rho)` with `rho < 0`.
    Ces { rho: f64, coeffs: Vec<f64> },
    /// `min_{l in goods} b_l x_l`.
    Leontief { goods: Vec<usize>, b: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Buyer {
    pub budget: f64,
    pub utility: Utility,
}

impl Buyer {
    pub fn ces(budget: f64, rho: f64, coeffs: Vec<f64>) -> Self {
        Buyer { budget, utility: Utility::Ces { rho, coeffs } }
    }

    pub fn leontief(budget: f64, goods: Vec<usize>, b: Vec<f64>) -> Self {
        Buyer { budget, utility: Utility::Leontief { goods, b } }
    }
}

/// Precomputed per-buyer data for fast demand evaluation.
#[derive(Debug, Clone, PartialEq)]
enum Kernel {
    /// `sigma = 1/(1-rho)` and `a_l^sigma`.
    Ces { sigma: f64, weights: Vec<f64> },
    Leontief { goods: Vec<usize>, inv_b: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMarket {
    pub goods: usize,
    pub buyers: Vec<Buyer>,
    kernels: Vec<Kernel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    /// `bundles[i][j]`: buyer `i`'s demand for good `j`.
    pub bundles: Vec<Vec<f64>>,
    pub aggregate: Vec<f64>,
}

impl FisherMarket {
    pub fn new(goods: usize, buyers: Vec<Buyer>) -> Result<Self> {
        if goods == 0 || buyers.is_empty() {
            return Err(AcdError::invalid("market needs at least one good and one buyer"));
        }
        let mut kernels = Vec::with_capacity(buyers.len());
        for (i, b) in buyers.iter().enumerate() {
            if !(b.budget > 0.0 && b.budget.is_finite()) {
                return Err(AcdError::invalid(format!("buyer {i}: budget must be positive")));
            }
            kernels.push(match &b.utility {
                Utility::Ces { rho, coeffs } => {
                    if !(*rho < 0.0 && rho.is_finite()) {
                        return Err(AcdError::invalid(format!("buyer {i}: CES exponent must be negative, got {rho}")));
                    }
                    if coeffs.len() != goods {
                        return Err(AcdError::invalid(format!("buyer {i}: {} coefficients for {goods} goods", coeffs.len())));
                    }
                    if coeffs.iter().any(|a| !(*a >= 0.0 && a.is_finite())) || coeffs.iter().all(|&a| a == 0.0) {
                        return Err(AcdError::invalid(format!("buyer {i}: coefficients must be nonnegative, not all zero")));
                    }
                    let sigma = 1.0 / (1.0 - rho);
                    Kernel::Ces { sigma, weights: coeffs.iter().map(|a| a.powf(sigma)).collect() }
                }
                Utility::Leontief { goods: set, b } => {
                    if set.is_empty() || set.len() != b.len() {
                        return Err(AcdError::invalid(format!("buyer {i}: Leontief goods and weights must be nonempty and equal length")));
                    }
                    let mut seen = vec![false; goods];
                    for &l in set {
                        if l >= goods || std::mem::replace(&mut seen[l], true) {
                            return Err(AcdError::invalid(format!("buyer {i}: bad or repeated good {l}")));
                        }
                    }
                    if b.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                        return Err(AcdError::invalid(format!("buyer {i}: Leontief weights must be positive")));
                    }
                    Kernel::Leontief { goods: set.clone(), inv_b: b.iter().map(|v| 1.0 / v).collect() }
                }
            });
        }
        Ok(FisherMarket { goods, buyers, kernels })
    }

    pub fn total_budget(&self) -> f64 {
        self.buyers.iter().map(|b| b.budget).sum()
    }

    /// Goods no buyer wants; their equilibrium price is zero.
    pub fn unwanted_goods(&self) -> Vec<usize> {
        let mut wanted = vec![false; self.goods];
        for k in &self.kernels {
            match k {
                Kernel::Ces { weights, .. } => {
                    for (j, w) in weights.iter().enumerate() {
                        wanted[j] |= *w > 0.0;
                    }
                }
                Kernel::Leontief { goods, .. } => goods.iter().for_each(|&j| wanted[j] = true),
            }
        }
        (0..self.goods).filter(|&j| !wanted[j]).collect()
    }

    pub fn is_ces(&self) -> bool {
        self.kernels.iter().all(|k| matches!(k, Kernel::Ces { .. }))
    }

    fn check_prices(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.goods {
            return Err(AcdError::invalid(format!("{} prices for {} goods", p.len(), self.goods)));
        }
        if let Some(j) = p.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(AcdError::Domain(format!("price of good {j} must be positive, got {}", p[j])));
        }
        Ok(())
    }

    /// Adds buyer `i`'s bundle (scaled by nothing) into `out` via `emit(j, x_ij)`.
    fn buyer_demand(&self, i: usize, p: &[f64], mut emit: impl FnMut(usize, f64)) {
        let e = self.buyers[i].budget;
        match &self.kernels[i] {
            Kernel::Ces { sigma, weights } => {
                let denom: f64 = weights.iter().zip(p).map(|(w, pj)| w * pj.powf(1.0 - sigma)).sum();
                for (j, (w, pj)) in weights.iter().zip(p).enumerate() {
                    if *w > 0.0 {
                        emit(j, e * w * pj.powf(-sigma) / denom);
                    }
                }
            }
            Kernel::Leontief { goods, inv_b } => {
                let cost: f64 = goods.iter().zip(inv_b).map(|(&l, ib)| p[l] * ib).sum();
                for (&l, ib) in goods.iter().zip(inv_b) {
                    emit(l, e * ib / cost);
                }
            }
        }
    }

    fn log_cost_index(&self, i: usize, p: &[f64]) -> f64 {
        match &self.kernels[i] {
            Kernel::Ces { sigma, weights } => {
                let s: f64 = weights.iter().zip(p).map(|(w, pj)| w * pj.powf(1.0 - sigma)).sum();
                s.ln() / (1.0 - sigma)
            }
            Kernel::Leontief { goods, inv_b } => goods.iter().zip(inv_b).map(|(&l, ib)| p[l] * ib).sum::<f64>().ln(),
        }
    }

    fn aggregate_into(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.buyers.len() {
            self.buyer_demand(i, p, |j, x| out[j] += x);
        }
    }
}

pub fn demand(market: &FisherMarket, p: &[f64]) -> Result<Demand> {
    market.check_prices(p)?;
    let mut bundles = vec![vec![0.0; market.goods]; market.buyers.len()];
    let mut aggregate = vec![0.0; market.goods];
    for (i, row) in bundles.iter_mut().enumerate() {
        market.buyer_demand(i, p, |j, x| {
            row[j] = x;
            aggregate[j] += x;
        });
    }
    Ok(Demand { bundles, aggregate })
}

/// Aggregate demand minus the unit supply.
pub fn excess_demand(market: &FisherMarket, p: &[f64]) -> Result<Vec<f64>> {
    market.check_prices(p)?;
    let mut z = vec![0.0; market.goods];
    market.aggregate_into(p, &mut z);
    z.iter_mut().for_each(|v| *v -= 1.0);
    Ok(z)
}

/// Convex potential whose gradient is minus the excess demand:
/// `sum_j p_j - sum_i e_i ln P_i(p) + sum_i e_i ln e_i` with `P_i` the buyer's unit-cost index.
pub fn phi(market: &FisherMarket, p: &[f64]) -> Result<f64> {
    market.check_prices(p)?;
    let mut v: f64 = p.iter().sum();
    for (i, b) in market.buyers.iter().enumerate() {
        v += b.budget * (b.budget.ln() - market.log_cost_index(i, p));
    }
    Ok(v)
}

/// `p_j (1 + lambda min(z_j, 1))` for every good at once.
pub fn sync_tatonnement_step(p: &[f64], z: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(AcdError::invalid(format!("step factor must be positive, got {lambda}")));
    }
    if p.len() != z.len() {
        return Err(AcdError::invalid("price and excess-demand lengths differ"));
    }
    let mut out = Vec::with_capacity(p.len());
    for (j, (pj, zj)) in p.iter().zip(z).enumerate() {
        if !(*pj > 0.0) {
            return Err(AcdError::Domain(format!("price of good {j} must be positive")));
        }
        let next = pj * (1.0 + lambda * zj.min(1.0));
        if !(next > 0.0 && next.is_finite()) {
            return Err(AcdError::invalid(format!("step factor {lambda} drives price of good {j} to {next}")));
        }
        out.push(next);
    }
    Ok(out)
}

/// Largest violation of the equilibrium conditions: `|z_j|` for priced goods,
/// `max(z_j, 0)` for goods priced at or below `tol_price`.
pub fn equilibrium_residual(market: &FisherMarket, p: &[f64], tol_price: f64) -> Result<f64> {
    let z = excess_demand(market, p)?;
    Ok(residual_from(&z, p, tol_price))
}

pub(crate) fn residual_from(z: &[f64], p: &[f64], tol_price: f64) -> f64 {
    z.iter()
        .zip(p)
        .map(|(zj, pj)| if *pj > tol_price { zj.abs() } else { zj.max(0.0) })
        .fold(0.0, f64::max)
}

/// Default price tolerance for the residual: `1e-8 * max_j p0_j`.
pub fn default_tol_price(p0: &[f64]) -> f64 {
    1e-8 * p0.iter().copied().fold(0.0, f64::max)
}

/// Two goods, one buyer with `rho = -1`, unit coefficients and budget; equilibrium at `(1/2, 1/2)`.
pub fn symmetric_ces_market() -> FisherMarket {
    FisherMarket::new(2, vec![Buyer::ces(1.0, -1.0, vec![1.0, 1.0])]).expect("valid fixture")
}

/// Four goods, three Leontief buyers.
pub fn leontief_fixture() -> FisherMarket {
    FisherMarket::new(
        4,
        vec![
            Buyer::leontief(1.0, vec![0, 1], vec![2.0, 2.0]),
            Buyer::leontief(1.5, vec![1, 2, 3], vec![2.0, 2.0, 2.0]),
            Buyer::leontief(1.5, vec![0, 2, 3], vec![2.0, 2.0, 2.0]),
        ],
    )
    .expect("valid fixture")
}

/// Random complementary-CES market: budgets in `[0.5, 1.5]`, coefficients in `[0.1, 1]`.
pub fn random_ces_market(goods: usize, buyers: usize, rho: f64, seed: u64) -> Result<FisherMarket> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let list = (0..buyers)
        .map(|_| {
            let budget = rng.gen_range(0.5..1.5);
            Buyer::ces(budget, rho, (0..goods).map(|_| rng.gen_range(0.1..1.0)).collect())
        })
        .collect();
    FisherMarket::new(goods, list)
}
