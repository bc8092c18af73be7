use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AcdError, Result};
use crate::problems::CompositeProblem;
use crate::prox::d_hat_unchecked;

use super::{check_gamma, AsyncConfig, EngineKind, Trace, UpdateRecord};

/// Cyclic descent from the origin: `epochs` passes over `0..n`.
pub fn ccd_solve(problem: &CompositeProblem, gamma: f64, epochs: u64) -> Result<Trace> {
    ccd_solve_from(problem, &vec![0.0; problem.dim()], gamma, epochs)
}

pub fn ccd_solve_from(problem: &CompositeProblem, x0: &[f64], gamma: f64, epochs: u64) -> Result<Trace> {
    check_gamma(gamma)?;
    if epochs == 0 {
        return Err(AcdError::invalid("epochs must be >= 1"));
    }
    let n = problem.dim();
    let config = AsyncConfig::partitioned(1, 0, n as u64, 1, epochs);
    run(problem, x0, gamma, EngineKind::Ccd, config, (0..epochs).flat_map(|_| 0..n))
}

/// Uniformly random coordinate selection, `t_bar` updates from the origin.
pub fn scd_solve(problem: &CompositeProblem, gamma: f64, t_bar: u64, seed: u64) -> Result<Trace> {
    scd_solve_from(problem, &vec![0.0; problem.dim()], gamma, t_bar, seed)
}

pub fn scd_solve_from(problem: &CompositeProblem, x0: &[f64], gamma: f64, t_bar: u64, seed: u64) -> Result<Trace> {
    check_gamma(gamma)?;
    let n = problem.dim();
    // Same stream as worker 0 of the asynchronous uniform engine.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = AsyncConfig::uniform(1, 0, t_bar, seed);
    let picks = (0..t_bar).map(move |_| rng.gen_range(0..n));
    run(problem, x0, gamma, EngineKind::Scd, config, picks)
}

fn run(
    problem: &CompositeProblem,
    x0: &[f64],
    gamma: f64,
    engine: EngineKind,
    config: AsyncConfig,
    picks: impl Iterator<Item = usize>,
) -> Result<Trace> {
    if x0.len() != problem.dim() {
        return Err(AcdError::invalid(format!("x0 has length {}, problem has {}", x0.len(), problem.dim())));
    }
    let mut x = x0.to_vec();
    let mut records = Vec::new();
    for (i, k) in picks.enumerate() {
        let t = i as u64 + 1;
        let g = problem.partial(k, &x);
        let d = d_hat_unchecked(g, x[k], gamma, &problem.psi[k]);
        if !g.is_finite() || !d.is_finite() {
            return Err(AcdError::NonFinite { update: t, what: format!("gradient {g}, step {d} on coordinate {k}") });
        }
        x[k] += d;
        records.push(UpdateRecord { t, k, delta: d, g_tilde: g, gamma, started_snapshot: t - 1, ns: 0 });
    }
    Ok(Trace {
        engine,
        gamma,
        config,
        x0: x0.to_vec(),
        final_x: x,
        records,
        drain_start: None,
        problem_label: super::export::label(problem),
        failure: None,
    })
}
