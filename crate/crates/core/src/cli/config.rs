//! Run configuration files.
//!
//! ```toml
//! seed = 7
//!
//! [problem]
//! kind = "ridge"
//! n = 16
//! seed = 1
//! curvature = 1.0
//!
//! [solver]
//! engine = "pacd"     # ccd, scd, pacd, sacd
//! epochs = 200        # passes (ccd, pacd)
//! # gamma = 40.0      # defaults to the engine's rule
//!
//! [async]
//! workers = 4
//! q = 8
//! r = 32
//! kappa_max = 2
//! schedule = "partitioned_cyclic"
//!
//! [bench]
//! workers = [1, 2, 4, 8]
//! target_ratio = 1e-4
//! ```
//!
//! `problem_file = "path.toml"` may replace `[problem]`; the market command
//! reads `[market]` (a market file table) or `market_file`. Relative paths
//! resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::engine::{AsyncConfig, EngineKind};
use crate::error::{AcdError, Result};
use crate::market::{read_market, MarketFile};
use crate::problems::{read_problem, CompositeProblem, ProblemFile};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub engine: EngineKind,
    pub gamma: Option<f64>,
    pub epochs: u64,
    /// Total updates for the uniform schedules; zero means `100 n`.
    pub t_bar: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection { engine: EngineKind::Ccd, gamma: None, epochs: 100, t_bar: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub workers: Vec<usize>,
    /// Rows reach the target when `F <= target_ratio * F(x0)`.
    pub target_ratio: Option<f64>,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection { workers: vec![1, 2, 4, 8], target_ratio: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub samples: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { samples: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub problem: Option<ProblemFile>,
    pub problem_file: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(rename = "async")]
    pub async_config: Option<AsyncConfig>,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub verify: VerifySection,
    pub market: Option<MarketFile>,
    pub market_file: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| AcdError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn build_problem(&self) -> Result<CompositeProblem> {
        match (&self.problem, &self.problem_file) {
            (Some(p), None) => p.build(),
            (None, Some(f)) => read_problem(&self.resolve(f)),
            _ => Err(AcdError::Parse("config needs exactly one of [problem] or problem_file".into())),
        }
    }

    pub fn market_file(&self) -> Result<MarketFile> {
        match (&self.market, &self.market_file) {
            (Some(m), None) => Ok(m.clone()),
            (None, Some(f)) => read_market(&self.resolve(f)),
            _ => Err(AcdError::Parse("config needs exactly one of [market] or market_file".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doc_example_parses() {
        let text = r#"
seed = 7

[problem]
kind = "ridge"
n = 16
seed = 1
curvature = 1.0

[solver]
engine = "pacd"
epochs = 200

[async]
workers = 4
q = 8
r = 32
kappa_max = 2
schedule = "partitioned_cyclic"

[bench]
workers = [1, 2, 4, 8]
target_ratio = 1e-4
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.solver.engine, EngineKind::Pacd);
        assert_eq!(cfg.async_config.as_ref().unwrap().q, 8);
        assert_eq!(cfg.build_problem().unwrap().dim(), 16);
    }

    #[test]
    fn rejects_ambiguous_sources() {
        let cfg = RunConfig::parse("problem_file = \"a.toml\"\n[problem]\nkind = \"lower_bound\"\nn = 2\n").unwrap();
        assert!(cfg.build_problem().is_err());
        assert!(RunConfig::parse("unknown = 1").is_err());
    }
}
