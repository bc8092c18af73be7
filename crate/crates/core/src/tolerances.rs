//! Numerical tolerances shared by the solvers, the audits and the test suites.

/// One record holding every tolerance constant used across the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative slack for the exact-in-real-arithmetic lemma inequalities.
    pub lemma_rel: f64,
    /// Absolute slack factor for per-update objective audits, scaled by `max(1, F(x0))`.
    pub progress_abs: f64,
    /// Slack factor for amortized-potential monotonicity, scaled by `F(x0)`.
    pub potential_rel: f64,
    /// Per-coordinate replay tolerance for parallel traces.
    pub replay_abs: f64,
    /// Relative agreement between incremental and direct objective evaluation.
    pub objective_rel: f64,
    /// Symmetry check for Hessians.
    pub symmetry_abs: f64,
    /// Slack used when flooring step-size ratios (guards `7.999999` → 7).
    pub floor_eps: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    lemma_rel: 1e-9,
    progress_abs: 1e-9,
    potential_rel: 1e-8,
    replay_abs: 1e-9,
    objective_rel: 1e-9,
    symmetry_abs: 1e-12,
    floor_eps: 1e-9,
};

impl Default for Tolerances {
    fn default() -> Self {
        TOLERANCES
    }
}
