//! Shared-memory asynchronous engines.
//!
//! One iteration of a worker:
//!
//! 1. pass the gates (pseudo-round quota, window start gate, admission gate);
//! 2. register the commit counter value `c` as its snapshot and wait until every
//!    commit up to `c` is published;
//! 3. read the cells it needs, one atomic load each, and form `g_tilde`;
//! 4. reserve commit index `t = cur + 1` by CAS on the commit counter, provided
//!    no in-flight update would exceed `q` interfering commits;
//! 5. re-read its own coordinate, write `x_k + d_hat`, wait for `t - 1` to be
//!    published, then publish `t`.
//!
//! The uniform engine additionally holds a per-coordinate flag from before step 2
//! until after step 5.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AcdError, Result};
use crate::problems::CompositeProblem;
use crate::prox::d_hat_unchecked;

use super::audit::measure_interference;
use super::{check_gamma, AsyncConfig, CoordinateStore, EngineKind, Schedule, Trace, UpdateRecord};

const IDLE: u64 = u64::MAX;
const STALL: Duration = Duration::from_secs(2);

/// Partitioned cyclic schedule from the origin.
pub fn pacd_run(problem: &CompositeProblem, gamma: f64, config: &AsyncConfig) -> Result<Trace> {
    pacd_run_from(problem, &vec![0.0; problem.dim()], gamma, config)
}

pub fn pacd_run_from(problem: &CompositeProblem, x0: &[f64], gamma: f64, config: &AsyncConfig) -> Result<Trace> {
    if config.schedule != Schedule::PartitionedCyclic {
        return Err(AcdError::invalid("pacd_run needs the partitioned cyclic schedule"));
    }
    run(problem, x0, gamma, config, EngineKind::Pacd)
}

/// Uniform random schedule with exactly `t_bar` selections, from the origin.
pub fn sacd_run(problem: &CompositeProblem, gamma: f64, config: &AsyncConfig) -> Result<Trace> {
    sacd_run_from(problem, &vec![0.0; problem.dim()], gamma, config)
}

pub fn sacd_run_from(problem: &CompositeProblem, x0: &[f64], gamma: f64, config: &AsyncConfig) -> Result<Trace> {
    if config.schedule != Schedule::UniformRandom {
        return Err(AcdError::invalid("sacd_run needs the uniform random schedule"));
    }
    run(problem, x0, gamma, config, EngineKind::Sacd)
}

struct Shared<'a> {
    problem: &'a CompositeProblem,
    cfg: &'a AsyncConfig,
    gamma: f64,
    store: CoordinateStore,
    slots: Vec<AtomicU64>,
    abort: AtomicBool,
    error: Mutex<Option<AcdError>>,
    draining: AtomicBool,
    drain_start: AtomicU64,
    /// Last `kappa_max` commit indices per coordinate, as a ring.
    recent: Vec<AtomicU64>,
    commits: Vec<AtomicU64>,
    round: AtomicU64,
    counters: [AtomicU64; 3],
    round_total: u64,
    issued: AtomicU64,
    clock: Instant,
}

impl Shared<'_> {
    fn fail(&self, e: AcdError) {
        let mut slot = self.error.lock().unwrap_or_else(|p| p.into_inner());
        if slot.is_none() {
            *slot = Some(e);
        }
        self.abort.store(true, Ordering::SeqCst);
    }

    fn aborted(&self) -> bool {
        self.abort.load(Ordering::Acquire)
    }

    fn draining(&self) -> bool {
        self.draining.load(Ordering::SeqCst)
    }

    fn begin_drain(&self) {
        let c = self.store.committed();
        if !self.draining.swap(true, Ordering::SeqCst) {
            self.drain_start.store(c + 1, Ordering::SeqCst);
        }
    }

    /// Spins, then yields, until `ready` holds. Returns false on abort or stall.
    fn wait(&self, mut ready: impl FnMut() -> bool) -> bool {
        let mut spins = 0u32;
        let mut seen = self.store.published();
        let mut since = Instant::now();
        loop {
            if ready() {
                return true;
            }
            if self.aborted() {
                return false;
            }
            spins = spins.wrapping_add(1);
            if spins < 32 {
                std::hint::spin_loop();
            } else {
                thread::yield_now();
            }
            if spins % 128 == 0 {
                let p = self.store.published();
                if p != seen {
                    seen = p;
                    since = Instant::now();
                } else if since.elapsed() > STALL {
                    self.fail(AcdError::Enforcement(format!("no commit published for {STALL:?} after commit {p}")));
                    return false;
                }
            }
        }
    }

    /// Smallest commit index at which `k` may commit without exceeding the window cap.
    fn earliest(&self, k: usize) -> u64 {
        let kappa = self.cfg.kappa_max;
        let cnt = self.commits[k].load(Ordering::Acquire);
        if cnt < kappa {
            0
        } else {
            self.recent[k * kappa as usize + (cnt % kappa) as usize].load(Ordering::Acquire) + self.cfg.r
        }
    }

    /// Oldest `(snapshot, worker)` whose bound a commit at `cur + 1` would break, if any.
    fn blocker(&self, w: usize, cur: u64) -> Option<(u64, usize)> {
        let q = self.cfg.q;
        self.slots
            .iter()
            .enumerate()
            .map(|(i, s)| (s.load(Ordering::SeqCst), i))
            .filter(|&(s, i)| i != w && s != IDLE && cur + 1 > s + q)
            .min()
    }

    /// Bookkeeping done while holding the publish order (commit `t` of `k`).
    fn ordered_bookkeeping(&self, t: u64, k: usize, my_round: u64) {
        let kappa = self.cfg.kappa_max;
        let cnt = self.commits[k].load(Ordering::Relaxed);
        self.recent[k * kappa as usize + (cnt % kappa) as usize].store(t, Ordering::Release);
        self.commits[k].store(cnt + 1, Ordering::Release);
        if self.cfg.enforcement.pseudo_rounds && self.cfg.schedule == Schedule::PartitionedCyclic && !self.draining() {
            let idx = (my_round % 3) as usize;
            let v = self.counters[idx].fetch_add(1, Ordering::AcqRel) + 1;
            if v == self.round_total {
                self.counters[((my_round + 1) % 3) as usize].store(0, Ordering::Release);
                self.round.store(my_round + 1, Ordering::SeqCst);
            }
        }
    }
}

enum Plan {
    Cyclic { first: usize, len: usize, steps: u64 },
    Uniform { rng: ChaCha8Rng },
}

// Marks the run aborted if a worker unwinds, so the others stop waiting on it.
struct PanicGuard<'a, 'b>(&'a Shared<'b>);

impl Drop for PanicGuard<'_, '_> {
    fn drop(&mut self) {
        if thread::panicking() {
            self.0.fail(AcdError::Worker("worker panicked".into()));
        }
    }
}

fn worker(sh: &Shared, w: usize, mut plan: Plan) -> Vec<UpdateRecord> {
    let _guard = PanicGuard(sh);
    let cfg = sh.cfg;
    let q = cfg.q;
    let n = sh.problem.dim();
    let admit_limit = (q / 2).max(1);
    let quota = match plan {
        Plan::Cyclic { len, .. } => (cfg.r / (2 * n as u64)).max(1) * len as u64,
        Plan::Uniform { .. } => 0,
    };
    let mut out = Vec::new();
    let mut step = 0u64;
    let mut my_round = 0u64;
    let mut done_in_round = 0u64;
    loop {
        if sh.aborted() {
            break;
        }
        let k = match &mut plan {
            Plan::Cyclic { first, len, steps } => {
                if step == *steps {
                    sh.begin_drain();
                    break;
                }
                *first + (step % *len as u64) as usize
            }
            Plan::Uniform { rng } => {
                if sh.issued.fetch_add(1, Ordering::SeqCst) >= cfg.t_bar {
                    sh.begin_drain();
                    break;
                }
                rng.gen_range(0..n)
            }
        };
        let cyclic = matches!(plan, Plan::Cyclic { .. });

        if cyclic && cfg.enforcement.pseudo_rounds && done_in_round == quota {
            if !sh.wait(|| sh.draining() || sh.round.load(Ordering::SeqCst) > my_round) {
                break;
            }
            my_round += 1;
            done_in_round = 0;
        }
        if cfg.enforcement.window && cyclic {
            // Only k's own commits move its window, so once open it stays open until we commit.
            // Taking an admission slot any earlier can starve the worker that is next in line.
            let start_at = sh.earliest(k).saturating_sub(1);
            if !sh.wait(|| sh.draining() || sh.store.committed() >= start_at) {
                break;
            }
        }
        let admitted = sh.wait(|| {
            let s = sh.store.started();
            let c = sh.store.committed();
            (!cfg.enforcement.admission || s + 1 <= c + admit_limit) && sh.store.try_start(s)
        });
        if !admitted {
            break;
        }
        if !cyclic && !sh.wait(|| sh.store.try_lock(k)) {
            break;
        }

        let reserved = 'read: loop {
            let c = loop {
                let c = sh.store.committed();
                sh.slots[w].store(c, Ordering::SeqCst);
                if sh.store.committed() == c {
                    break c;
                }
            };
            if !sh.wait(|| sh.store.published() >= c) {
                break None;
            }
            let g = sh.problem.hessian.row_dot(k, |j| sh.store.load(j)) - sh.problem.linear[k];
            let mut restart = false;
            let mut resume_at = None;
            let mut t = 0;
            let ok = sh.wait(|| {
                let cur = sh.store.committed();
                let window_at = if cfg.enforcement.window && cyclic && !sh.draining() { sh.earliest(k) } else { 0 };
                if cfg.enforcement.interference {
                    if cur > c + q {
                        // Lost the registration race; read again.
                        restart = true;
                        return true;
                    }
                    if let Some(older) = sh.blocker(w, cur) {
                        // Two reads both at their last chance would wait on each other forever.
                        // The younger one drops its read until something commits.
                        if cur >= c + q && older < (c, w) {
                            restart = true;
                            resume_at = Some(cur + 1);
                            return true;
                        }
                        return false;
                    }
                }
                if cur + 1 < window_at {
                    return false;
                }
                if sh.store.try_reserve(cur) {
                    t = cur + 1;
                    true
                } else {
                    false
                }
            });
            if !ok {
                break None;
            }
            if restart {
                sh.slots[w].store(IDLE, Ordering::SeqCst);
                if let Some(at) = resume_at {
                    if !sh.wait(|| sh.draining() || sh.store.committed() >= at) {
                        break None;
                    }
                }
                continue 'read;
            }
            break Some((c, g, t));
        };
        let Some((c, g, t)) = reserved else { break };
        let x_before = sh.store.load(k);
        let d = d_hat_unchecked(g, x_before, sh.gamma, &sh.problem.psi[k]);
        if !g.is_finite() || !d.is_finite() {
            sh.fail(AcdError::NonFinite { update: t, what: format!("gradient {g}, step {d} on coordinate {k}") });
            break;
        }
        sh.store.store(k, x_before + d);
        if !sh.wait(|| sh.store.published() == t - 1) {
            break;
        }
        sh.ordered_bookkeeping(t, k, my_round);
        let ns = sh.clock.elapsed().as_nanos() as u64;
        sh.store.publish(t, k);
        sh.slots[w].store(IDLE, Ordering::SeqCst);
        if !cyclic {
            sh.store.unlock(k);
        }
        out.push(UpdateRecord { t, k, delta: d, g_tilde: g, gamma: sh.gamma, started_snapshot: c, ns });
        step += 1;
        done_in_round += 1;
    }
    out
}

fn run(problem: &CompositeProblem, x0: &[f64], gamma: f64, cfg: &AsyncConfig, engine: EngineKind) -> Result<Trace> {
    check_gamma(gamma)?;
    let n = problem.dim();
    if x0.len() != n {
        return Err(AcdError::invalid(format!("x0 has length {}, problem has {n}", x0.len())));
    }
    cfg.validate(n)?;
    let kappa = cfg.kappa_max.max(1) as usize;
    let sh = Shared {
        problem,
        cfg,
        gamma,
        store: CoordinateStore::new(x0),
        slots: (0..cfg.workers).map(|_| AtomicU64::new(IDLE)).collect(),
        abort: AtomicBool::new(false),
        error: Mutex::new(None),
        draining: AtomicBool::new(false),
        drain_start: AtomicU64::new(0),
        recent: (0..n * kappa).map(|_| AtomicU64::new(0)).collect(),
        commits: (0..n).map(|_| AtomicU64::new(0)).collect(),
        round: AtomicU64::new(0),
        counters: [AtomicU64::new(0), AtomicU64::new(0), AtomicU64::new(0)],
        round_total: (cfg.r / (2 * n as u64)).max(1) * n as u64,
        issued: AtomicU64::new(0),
        clock: Instant::now(),
    };
    let plans: Vec<Plan> = (0..cfg.workers)
        .map(|w| match cfg.schedule {
            Schedule::PartitionedCyclic => {
                let first = w * n / cfg.workers;
                let len = (w + 1) * n / cfg.workers - first;
                Plan::Cyclic { first, len, steps: cfg.epochs * len as u64 }
            }
            Schedule::UniformRandom => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(w as u64);
                Plan::Uniform { rng }
            }
        })
        .collect();

    let mut records = Vec::new();
    thread::scope(|scope| {
        let handles: Vec<_> = plans
            .into_iter()
            .enumerate()
            .map(|(w, plan)| {
                let sh = &sh;
                scope.spawn(move || worker(sh, w, plan))
            })
            .collect();
        for h in handles {
            match h.join() {
                Ok(mut part) => records.append(&mut part),
                Err(_) => sh.fail(AcdError::Worker("worker panicked".into())),
            }
        }
    });
    records.sort_by_key(|r| r.t);

    let drain = sh.drain_start.load(Ordering::SeqCst);
    let trace = Trace {
        engine,
        gamma,
        config: cfg.clone(),
        x0: x0.to_vec(),
        final_x: sh.store.snapshot(),
        records,
        drain_start: (drain > 0 && drain <= sh.store.committed()).then_some(drain),
        problem_label: super::export::label(problem),
        failure: None,
    };
    let failure = sh.error.into_inner().unwrap_or_else(|p| p.into_inner());
    if let Some(e) = failure {
        return Err(abort_with(trace, e.to_string()));
    }
    trace.check_dense()?;

    let report = measure_interference(&trace)?;
    if cfg.enforcement.interference && report.q_observed > cfg.q {
        let reason = format!("observed interference {} exceeds q = {}", report.q_observed, cfg.q);
        return Err(abort_with(trace, reason));
    }
    if let (true, Schedule::PartitionedCyclic, Some(win)) = (cfg.enforcement.window, cfg.schedule, &report.window) {
        if win.windows_checked > 0 && win.max_count > cfg.kappa_max {
            let reason = format!("coordinate updated {} times in a window of {}", win.max_count, cfg.r);
            return Err(abort_with(trace, reason));
        }
    }
    Ok(trace)
}

fn abort_with(mut trace: Trace, reason: String) -> AcdError {
    // Keep the dense prefix and rebuild the state it implies.
    let keep = trace.records.iter().enumerate().take_while(|(i, r)| r.t == *i as u64 + 1).count();
    trace.records.truncate(keep);
    let mut x = trace.x0.clone();
    for r in &trace.records {
        x[r.k] += r.delta;
    }
    trace.final_x = x;
    trace.failure = Some(reason.clone());
    AcdError::Aborted { reason, partial: Box::new(trace) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ccd_solve, scd_solve, Enforcement};
    use crate::problems::make_ridge;

    #[test]
    fn single_worker_matches_cyclic() {
        let p = make_ridge(12, 3, 0.5).unwrap();
        let cfg = AsyncConfig::partitioned(1, 2, 24, 2, 5);
        let a = pacd_run(&p, 4.0, &cfg).unwrap();
        let b = ccd_solve(&p, 4.0, 5).unwrap();
        assert!(a.same_updates(&b));
    }

    #[test]
    fn single_worker_matches_stochastic() {
        let p = make_ridge(12, 3, 0.5).unwrap();
        let cfg = AsyncConfig::uniform(1, 2, 500, 77);
        let a = sacd_run(&p, 3.0, &cfg).unwrap();
        let b = scd_solve(&p, 3.0, 500, 77).unwrap();
        assert!(a.same_updates(&b));
    }

    #[test]
    fn parallel_runs_respect_gates() {
        let p = make_ridge(16, 1, 1.0).unwrap();
        let cfg = AsyncConfig::partitioned(4, 4, 32, 2, 20);
        let tr = pacd_run(&p, 50.0, &cfg).unwrap();
        assert_eq!(tr.len(), 16 * 20);
        let rep = measure_interference(&tr).unwrap();
        assert!(rep.q_observed <= 4);
        let cfg = AsyncConfig::uniform(3, 4, 2000, 5);
        let tr = sacd_run(&p, 10.0, &cfg).unwrap();
        assert_eq!(tr.len(), 2000);
        assert!(measure_interference(&tr).unwrap().q_observed <= 4);
    }

    #[test]
    fn ungated_run_completes() {
        let p = make_ridge(8, 1, 1.0).unwrap();
        let mut cfg = AsyncConfig::partitioned(2, 1, 8, 1, 10);
        cfg.enforcement = Enforcement::off();
        let tr = pacd_run(&p, 20.0, &cfg).unwrap();
        assert_eq!(tr.len(), 80);
    }

    #[test]
    fn schedule_mismatch_rejected() {
        let p = make_ridge(4, 1, 1.0).unwrap();
        assert!(pacd_run(&p, 1.0, &AsyncConfig::uniform(1, 0, 10, 0)).is_err());
        assert!(sacd_run(&p, 1.0, &AsyncConfig::partitioned(1, 0, 4, 1, 1)).is_err());
        assert!(pacd_run(&p, 1.0, &AsyncConfig::partitioned(1, 0, 3, 1, 1)).is_err());
    }

    #[test]
    fn nonfinite_start_aborts_with_partial_trace() {
        let p = make_ridge(4, 1, 1.0).unwrap();
        let cfg = AsyncConfig::partitioned(2, 2, 8, 2, 3);
        let err = pacd_run_from(&p, &[f64::NAN, 0.0, 0.0, 0.0], 10.0, &cfg).unwrap_err();
        match err {
            AcdError::Aborted { partial, .. } => assert!(partial.failure.is_some()),
            other => panic!("unexpected {other:?}"),
        }
    }
}
