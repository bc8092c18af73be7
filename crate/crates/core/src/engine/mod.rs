//! Solver engines and the commit-ordered trace they produce.
//!
//! Time is the commit index: the `t`-th reserved slot of the shared commit
//! counter. Every record carries the counter value seen when its read phase
//! began, so `t - 1 - started_snapshot` is the number of commits that landed
//! while it was in flight.

mod audit;
mod export;
mod parallel;
mod sequential;
mod store;

pub use audit::{measure_interference, InterferenceReport, WindowAudit};
pub use export::{format_trace, parse_trace, read_trace, summary_block, write_trace};
pub use parallel::{pacd_run, pacd_run_from, sacd_run, sacd_run_from};
pub use sequential::{ccd_solve, ccd_solve_from, scd_solve, scd_solve_from};
pub use store::CoordinateStore;

use serde::{Deserialize, Serialize};

use crate::error::{AcdError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub t: u64,
    pub k: usize,
    pub delta: f64,
    pub g_tilde: f64,
    pub gamma: f64,
    pub started_snapshot: u64,
    /// Wall-clock nanoseconds since the run started; zero for sequential engines.
    pub ns: u64,
}

impl UpdateRecord {
    pub fn interference(&self) -> u64 {
        self.t - 1 - self.started_snapshot
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    PartitionedCyclic,
    UniformRandom,
}

/// Switches for the synchronization gates of the asynchronous engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Enforcement {
    /// Block new iterations while `started - committed` would exceed `q/2`.
    pub admission: bool,
    /// Refuse a commit index that would push any in-flight update past `q`.
    pub interference: bool,
    /// Keep every coordinate at most `kappa_max` times in any `r` consecutive commits.
    pub window: bool,
    /// Per-worker quotas of `floor(r/2n)` passes per pseudo-round.
    pub pseudo_rounds: bool,
}

impl Default for Enforcement {
    fn default() -> Self {
        Enforcement { admission: true, interference: true, window: true, pseudo_rounds: true }
    }
}

impl Enforcement {
    pub fn off() -> Self {
        Enforcement { admission: false, interference: false, window: false, pseudo_rounds: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsyncConfig {
    pub workers: usize,
    pub q: u64,
    pub r: u64,
    pub kappa_max: u64,
    pub schedule: Schedule,
    /// Total selections (uniform schedule).
    #[serde(default)]
    pub t_bar: u64,
    /// Passes over each worker's partition (partitioned schedule).
    #[serde(default = "one")]
    pub epochs: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub enforcement: Enforcement,
}

fn one() -> u64 {
    1
}

impl AsyncConfig {
    pub fn partitioned(workers: usize, q: u64, r: u64, kappa_max: u64, epochs: u64) -> Self {
        AsyncConfig {
            workers,
            q,
            r,
            kappa_max,
            schedule: Schedule::PartitionedCyclic,
            t_bar: 0,
            epochs,
            seed: 0,
            enforcement: Enforcement::default(),
        }
    }

    pub fn uniform(workers: usize, q: u64, t_bar: u64, seed: u64) -> Self {
        AsyncConfig {
            workers,
            q,
            r: 1,
            kappa_max: 1,
            schedule: Schedule::UniformRandom,
            t_bar,
            epochs: 0,
            seed,
            enforcement: Enforcement { window: false, pseudo_rounds: false, ..Enforcement::default() },
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.workers == 0 {
            return Err(AcdError::invalid("workers must be >= 1"));
        }
        match self.schedule {
            Schedule::PartitionedCyclic => {
                if self.workers > n {
                    return Err(AcdError::invalid(format!("{} workers for {n} coordinates", self.workers)));
                }
                if self.r < n as u64 {
                    return Err(AcdError::invalid(format!("round length r={} must be >= n={n}", self.r)));
                }
                if self.kappa_max == 0 {
                    return Err(AcdError::invalid("kappa_max must be >= 1"));
                }
                if self.enforcement.window && self.kappa_max * (n as u64) < self.r {
                    return Err(AcdError::invalid(format!(
                        "window cap infeasible: kappa_max * n = {} < r = {}",
                        self.kappa_max * n as u64,
                        self.r
                    )));
                }
                if self.epochs == 0 {
                    return Err(AcdError::invalid("epochs must be >= 1"));
                }
            }
            Schedule::UniformRandom => {
                if self.t_bar == 0 {
                    return Err(AcdError::invalid("t_bar must be >= 1"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Ccd,
    Scd,
    Pacd,
    Sacd,
    /// Hand-built records.
    Fixture,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Ccd => "ccd",
            EngineKind::Scd => "scd",
            EngineKind::Pacd => "pacd",
            EngineKind::Sacd => "sacd",
            EngineKind::Fixture => "fixture",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "ccd" => EngineKind::Ccd,
            "scd" => EngineKind::Scd,
            "pacd" => EngineKind::Pacd,
            "sacd" => EngineKind::Sacd,
            "fixture" => EngineKind::Fixture,
            _ => return Err(AcdError::Parse(format!("unknown engine {s:?}"))),
        })
    }

    pub fn is_cyclic(self) -> bool {
        matches!(self, EngineKind::Ccd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub engine: EngineKind,
    pub gamma: f64,
    pub config: AsyncConfig,
    pub x0: Vec<f64>,
    pub final_x: Vec<f64>,
    pub records: Vec<UpdateRecord>,
    /// First commit index of the shutdown phase, which audits skip.
    pub drain_start: Option<u64>,
    pub problem_label: String,
    /// Set when the run was aborted and the trace is partial.
    pub failure: Option<String>,
}

impl Trace {
    /// A trace from hand-built records; `final_x` is recomputed by applying them.
    pub fn from_records(x0: Vec<f64>, gamma: f64, records: Vec<UpdateRecord>) -> Result<Self> {
        let mut final_x = x0.clone();
        for (i, r) in records.iter().enumerate() {
            if r.t != i as u64 + 1 {
                return Err(AcdError::CorruptTrace(format!("record {i} has commit index {}", r.t)));
            }
            if r.k >= x0.len() || r.started_snapshot >= r.t {
                return Err(AcdError::CorruptTrace(format!("record {} out of range", r.t)));
            }
            final_x[r.k] += r.delta;
        }
        let n = x0.len();
        Ok(Trace {
            engine: EngineKind::Fixture,
            gamma,
            config: AsyncConfig::partitioned(1, 0, n as u64, 1, 1),
            x0,
            final_x,
            records,
            drain_start: None,
            problem_label: String::new(),
            failure: None,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Last commit index covered by audits.
    pub fn audit_end(&self) -> u64 {
        match self.drain_start {
            Some(d) => d.saturating_sub(1),
            None => self.records.len() as u64,
        }
    }

    /// Equality ignoring wall-clock fields.
    pub fn same_updates(&self, other: &Trace) -> bool {
        self.x0 == other.x0
            && self.final_x.iter().map(|v| v.to_bits()).eq(other.final_x.iter().map(|v| v.to_bits()))
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.t == b.t
                    && a.k == b.k
                    && a.delta.to_bits() == b.delta.to_bits()
                    && a.g_tilde.to_bits() == b.g_tilde.to_bits()
                    && a.gamma.to_bits() == b.gamma.to_bits()
                    && a.started_snapshot == b.started_snapshot
            })
    }

    pub(crate) fn check_dense(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.t != i as u64 + 1 {
                return Err(AcdError::CorruptTrace(format!("commit indices not dense at position {i}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(AcdError::invalid(format!("step parameter must be positive, got {gamma}")))
    }
}
