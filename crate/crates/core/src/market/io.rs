//! TOML market descriptions.
//!
//! ```toml
//! goods = 2
//! initial_prices = [1.0, 1.0]
//!
//! [[buyers]]
//! budget = 1.0
//! utility = { kind = "ces", rho = -1.0, coeffs = [1.0, 1.0] }
//!
//! [tatonnement]
//! lambda = 0.02702702702702703
//! horizon = 500.0
//! ```
//!
//! `random_ces = { goods = 8, buyers = 8, rho = -1.0, seed = 3 }` may replace
//! `goods` and `buyers`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AcdError, Result};

use super::{random_ces_market, Buyer, FisherMarket, TatonnementConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCes {
    pub goods: usize,
    pub buyers: usize,
    pub rho: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goods: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub buyers: Vec<Buyer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_ces: Option<RandomCes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_prices: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tatonnement: Option<TatonnementConfig>,
}

impl MarketFile {
    pub fn explicit(market: &FisherMarket) -> Self {
        MarketFile { goods: Some(market.goods), buyers: market.buyers.clone(), ..Default::default() }
    }

    pub fn build(&self) -> Result<FisherMarket> {
        match (&self.random_ces, self.goods) {
            (Some(r), None) if self.buyers.is_empty() => random_ces_market(r.goods, r.buyers, r.rho, r.seed),
            (None, Some(goods)) => FisherMarket::new(goods, self.buyers.clone()),
            _ => Err(AcdError::Parse("market file needs either random_ces or goods with buyers".into())),
        }
    }

    /// Initial prices from the file, or all ones.
    pub fn start_prices(&self, market: &FisherMarket) -> Result<Vec<f64>> {
        match &self.initial_prices {
            Some(p) if p.len() != market.goods => {
                Err(AcdError::Parse(format!("{} initial prices for {} goods", p.len(), market.goods)))
            }
            Some(p) => Ok(p.clone()),
            None => Ok(vec![1.0; market.goods]),
        }
    }
}

pub fn parse_market(text: &str) -> Result<MarketFile> {
    toml::from_str(text).map_err(|e| AcdError::Parse(e.to_string()))
}

pub fn read_market(path: &Path) -> Result<MarketFile> {
    parse_market(&fs::read_to_string(path)?)
}

pub fn write_market(file: &MarketFile, path: &Path) -> Result<()> {
    let text = toml::to_string(file).map_err(|e| AcdError::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{leontief_fixture, symmetric_ces_market};

    #[test]
    fn roundtrip() {
        for m in [symmetric_ces_market(), leontief_fixture()] {
            let mut f = MarketFile::explicit(&m);
            f.tatonnement = Some(TatonnementConfig::default());
            f.initial_prices = Some(vec![1.0; m.goods]);
            let text = toml::to_string(&f).unwrap();
            let back = parse_market(&text).unwrap();
            assert_eq!(back, f);
            assert_eq!(back.build().unwrap(), m);
        }
    }

    #[test]
    fn doc_example_parses() {
        let text = r#"
goods = 2
initial_prices = [1.0, 1.0]

[[buyers]]
budget = 1.0
utility = { kind = "ces", rho = -1.0, coeffs = [1.0, 1.0] }

[tatonnement]
lambda = 0.02702702702702703
horizon = 500.0
"#;
        let f = parse_market(text).unwrap();
        assert_eq!(f.build().unwrap(), symmetric_ces_market());
        let r = parse_market("random_ces = { goods = 8, buyers = 8, rho = -1.0, seed = 3 }").unwrap();
        assert_eq!(r.build().unwrap().goods, 8);
        assert!(parse_market("goods = 2").unwrap().build().is_err());
        assert!(parse_market("bogus = 1").is_err());
    }
}
