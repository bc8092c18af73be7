//! Post-hoc audits of traces: replay, amortized potential, cyclic window
//! quantity, scalar lemma checks and rate comparison.

mod amortized;
mod ccd_q;
mod lemmas;
mod oracle;
mod rate;
mod replay;
mod report;

pub use amortized::{amortized_h_series, series_csv, AmortizedSeries};
pub use ccd_q::ccd_q_diagnostic;
pub use oracle::prox_oracle;
pub use lemmas::{lemma_checks, lemma_suite, random_tuple, LemmaCheck, LemmaTuple, LEMMA_NAMES};
pub use rate::{block_contractions, block_sums, rate_audit};
pub use replay::{mean_progress_bound, progress_audit, replay_objective, ReplaySeries};
pub use report::{Assertion, Report};

use crate::problems::CompositeProblem;

/// `(sum_j (g1_j - g2_j)^2, L^2 sum_k (x1_k - x2_k)^2)` for two states.
pub fn gradient_difference_check(problem: &CompositeProblem, x1: &[f64], x2: &[f64]) -> (f64, f64) {
    let g1 = problem.gradient(x1);
    let g2 = problem.gradient(x2);
    let lhs = g1.iter().zip(&g2).map(|(a, b)| (a - b) * (a - b)).sum();
    let l = problem.lipschitz.global;
    let rhs = l * l * x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    (lhs, rhs)
}
