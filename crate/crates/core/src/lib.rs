//! Asynchronous proximal coordinate descent on composite convex objectives,
//! with trace replay and amortized-potential audits, plus an asynchronous
//! tatonnement simulator for Fisher markets.

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod error;
pub mod market;
pub mod problems;
pub mod prox;
pub mod step_size;
pub mod tolerances;

pub use error::{AcdError, Result};
pub use prox::{prox_step, w_value, ProxStep, PsiSpec};
pub use step_size::{
    alpha_ccd, alpha_pacd, gamma_ccd, gamma_pacd, gamma_sacd, sacd_q_max, theoretical_rate, LipschitzInfo, PolicyMode,
    RateParams, StepSizePolicy,
};
pub use tolerances::{Tolerances, TOLERANCES};
