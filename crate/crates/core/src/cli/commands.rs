use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::analysis::{amortized_h_series, progress_audit, replay_objective, series_csv, Report};
use crate::engine::{
    ccd_solve, measure_interference, pacd_run, sacd_run, scd_solve, summary_block, write_trace, AsyncConfig,
    EngineKind, Schedule, Trace,
};
use crate::error::{AcdError, Result};
use crate::market::{
    async_tatonnement_run, format_price_trace, format_series, potential_report, residual_trend, step_size_audit,
    MAX_GUARANTEED_LAMBDA,
};
use crate::problems::CompositeProblem;
use crate::step_size::{gamma_ccd, gamma_pacd, gamma_sacd};

use super::config::RunConfig;

/// Per-command overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub force: bool,
}

/// What a command produced: human-readable text and whether a hard check failed.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub text: String,
    pub warnings: Vec<String>,
    pub failed: bool,
}

fn write_reports(dir: &Path, reports: &[Report]) -> Result<String> {
    let text: String = reports.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("\n");
    fs::write(dir.join("report.txt"), &text)?;
    Ok(text)
}

/// The engine's rule-derived step and the asynchronous settings it implies.
pub fn resolve_engine(
    cfg: &RunConfig,
    problem: &CompositeProblem,
    ov: &Overrides,
) -> Result<(f64, Option<AsyncConfig>)> {
    let n = problem.dim();
    let lip = &problem.lipschitz;
    let seed = ov.seed.or(cfg.seed).unwrap_or(0);
    let t_bar = if cfg.solver.t_bar == 0 { 100 * n as u64 } else { cfg.solver.t_bar };
    let with_overrides = |mut a: AsyncConfig| {
        if let Some(w) = ov.workers {
            a.workers = w;
        }
        a.seed = seed;
        a
    };
    Ok(match cfg.solver.engine {
        EngineKind::Ccd => (gamma_ccd(lip.global, n as u64)?, None),
        EngineKind::Scd => (lip.max_diag(), None),
        EngineKind::Pacd => {
            let mut a = with_overrides(
                cfg.async_config.clone().unwrap_or_else(|| AsyncConfig::partitioned(1, 0, n as u64, 1, 1)),
            );
            if a.schedule != Schedule::PartitionedCyclic {
                return Err(AcdError::invalid("pacd needs the partitioned_cyclic schedule"));
            }
            a.epochs = cfg.solver.epochs;
            let pol = gamma_pacd(lip.global, lip.max, a.kappa_max, a.r, a.q, Some(n as u64))?;
            (pol.gamma, Some(a))
        }
        EngineKind::Sacd => {
            let pol = gamma_sacd(&lip.diag, lip.residual, n as u64, None)?;
            let q_max = pol.q_max.unwrap_or(0);
            let mut a = with_overrides(
                cfg.async_config.clone().unwrap_or_else(|| AsyncConfig::uniform(1, q_max, t_bar, seed)),
            );
            if a.schedule != Schedule::UniformRandom {
                return Err(AcdError::invalid("sacd needs the uniform_random schedule"));
            }
            if cfg.solver.t_bar != 0 || a.t_bar == 0 {
                a.t_bar = t_bar;
            }
            if a.q > q_max && !ov.force {
                return Err(AcdError::invalid(format!(
                    "q = {} exceeds the largest admissible value {q_max}; pass --force to run anyway",
                    a.q
                )));
            }
            (pol.gamma, Some(a))
        }
        EngineKind::Fixture => return Err(AcdError::invalid("fixture is not a solver")),
    })
}

fn execute(cfg: &RunConfig, problem: &CompositeProblem, gamma: f64, a: Option<&AsyncConfig>, seed: u64) -> Result<Trace> {
    let n = problem.dim() as u64;
    match (cfg.solver.engine, a) {
        (EngineKind::Ccd, _) => ccd_solve(problem, gamma, cfg.solver.epochs),
        (EngineKind::Scd, _) => {
            let t_bar = if cfg.solver.t_bar == 0 { 100 * n } else { cfg.solver.t_bar };
            scd_solve(problem, gamma, t_bar, seed)
        }
        (EngineKind::Pacd, Some(a)) => pacd_run(problem, gamma, a),
        (EngineKind::Sacd, Some(a)) => sacd_run(problem, gamma, a),
        _ => Err(AcdError::invalid("engine needs asynchronous settings")),
    }
}

fn pick_gamma(cfg: &RunConfig, rule: f64, ov: &Overrides, warnings: &mut Vec<String>) -> Result<f64> {
    match cfg.solver.gamma {
        None => Ok(rule),
        Some(g) if !(g > 0.0 && g.is_finite()) => Err(AcdError::invalid(format!("gamma must be positive, got {g}"))),
        Some(g) if g < rule && !ov.force => Err(AcdError::invalid(format!(
            "gamma {g} is below the {} rule value {rule}; pass --force to run anyway",
            cfg.solver.engine.name()
        ))),
        Some(g) => {
            if g < rule {
                warnings.push(format!("warning: gamma {g} is below the rule value {rule}; guarantees do not apply"));
            }
            Ok(g)
        }
    }
}

/// Hard invariants on a finished trace.
pub fn audit_trace(problem: &CompositeProblem, trace: &Trace) -> Result<Vec<Report>> {
    let replay = replay_objective(problem, trace)?;
    let mut reports = Vec::new();
    let mut rule = Report::new("update rule");
    rule.check("rule_violations", 0.0, replay.rule_violations as f64, 0.0);
    reports.push(rule);
    reports.push(progress_audit(&replay));
    if trace.engine == EngineKind::Pacd {
        let q = trace.config.q;
        reports.push(amortized_h_series(&replay, trace.gamma, q).monotone_report(replay.initial_value()));
        let inter = measure_interference(trace)?;
        let mut r = Report::new("interference");
        r.check("q_observed", q as f64, inter.q_observed as f64, 0.0);
        if let (Some(w), true) = (inter.window, trace.config.enforcement.window) {
            r.check("window_min_count", w.min_count as f64, 1.0, 0.0);
            r.check("window_max_count", trace.config.kappa_max as f64, w.max_count as f64, 0.0);
        }
        reports.push(r);
    } else if trace.engine == EngineKind::Sacd {
        let inter = measure_interference(trace)?;
        let mut r = Report::new("interference");
        r.check("q_observed", trace.config.q as f64, inter.q_observed as f64, 0.0);
        reports.push(r);
    }
    Ok(reports)
}

/// Resolves the step size and asynchronous settings from `cfg` and runs its
/// engine on `problem`. Warnings (forced parameters) are appended to `warnings`.
pub fn run_solver(cfg: &RunConfig, problem: &CompositeProblem, ov: &Overrides, warnings: &mut Vec<String>) -> Result<Trace> {
    let (rule, a) = resolve_engine(cfg, problem, ov)?;
    let gamma = pick_gamma(cfg, rule, ov, warnings)?;
    let seed = ov.seed.or(cfg.seed).unwrap_or(0);
    if let Some(a) = &a {
        a.validate(problem.dim())?;
    }
    execute(cfg, problem, gamma, a.as_ref(), seed)
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path, ov: &Overrides) -> Result<Outcome> {
    let problem = cfg.build_problem()?;
    let mut outcome = Outcome::default();
    // Parameter errors surface before anything is written.
    resolve_engine(cfg, &problem, ov).and_then(|(rule, _)| pick_gamma(cfg, rule, ov, &mut Vec::new()))?;
    fs::create_dir_all(out)?;
    let trace = match run_solver(cfg, &problem, ov, &mut outcome.warnings) {
        Ok(t) => t,
        Err(AcdError::Aborted { reason, partial }) => {
            write_trace(&partial, &out.join("trace.txt"))?;
            outcome.text = format!("run aborted: {reason}\n{}", summary_block(&partial, &problem));
            fs::write(out.join("summary.txt"), &outcome.text)?;
            outcome.failed = true;
            return Ok(outcome);
        }
        Err(e) => return Err(e),
    };
    write_trace(&trace, &out.join("trace.txt"))?;
    let replay = replay_objective(&problem, &trace)?;
    let q = if trace.engine == EngineKind::Pacd { trace.config.q } else { 0 };
    fs::write(out.join("series.csv"), series_csv(&replay, &amortized_h_series(&replay, trace.gamma, q)))?;
    let reports = audit_trace(&problem, &trace)?;
    outcome.failed = reports.iter().any(|r| !r.passed());
    let summary = summary_block(&trace, &problem);
    fs::write(out.join("summary.txt"), &summary)?;
    let report_text = write_reports(out, &reports)?;
    outcome.text = format!("{summary}\n{report_text}");
    Ok(outcome)
}

pub fn cmd_market(cfg: &RunConfig, out: &Path, ov: &Overrides) -> Result<Outcome> {
    let file = cfg.market_file()?;
    let market = file.build()?;
    let p0 = file.start_prices(&market)?;
    let mut tat = file.tatonnement.clone().unwrap_or_default();
    if let Some(s) = ov.seed.or(cfg.seed) {
        tat.seed = s;
    }
    let mut outcome = Outcome::default();
    let beyond = tat.lambda > MAX_GUARANTEED_LAMBDA;
    if ov.force && beyond {
        tat.allow_large_step = true;
    }
    if tat.allow_large_step && beyond {
        outcome.warnings.push(format!("warning: step factor {} exceeds 1/37; potential checks are report-only", tat.lambda));
    }
    tat.validate()?;
    for j in market.unwanted_goods() {
        outcome.warnings.push(format!("warning: no buyer wants good {j}; its equilibrium price is 0"));
    }
    fs::create_dir_all(out)?;
    let trace = async_tatonnement_run(&market, &p0, &tat)?;
    fs::write(out.join("prices.csv"), format_price_trace(&trace))?;
    fs::write(out.join("series.csv"), format_series(&trace))?;
    let mut reports = vec![potential_report(&trace)];
    if market.is_ces() {
        reports.push(step_size_audit(&trace, &market)?);
    }
    let mut summary = String::new();
    let _ = writeln!(summary, "goods = {}", market.goods);
    let _ = writeln!(summary, "buyers = {}", market.buyers.len());
    let _ = writeln!(summary, "lambda = {:?}", trace.lambda);
    let _ = writeln!(summary, "horizon = {:?}", trace.horizon);
    let _ = writeln!(summary, "updates = {}", trace.events.len());
    let _ = writeln!(summary, "initial_residual = {:?}", trace.residual0);
    let _ = writeln!(summary, "final_residual = {:?}", trace.final_residual());
    let _ = writeln!(summary, "initial_phi = {:?}", trace.phi0);
    let _ = writeln!(summary, "final_phi = {:?}", trace.events.last().map_or(trace.phi0, |e| e.phi_after));
    let _ = writeln!(
        summary,
        "final_prices = {}",
        trace.final_prices.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
    );
    if let Ok(t) = residual_trend(&trace, 0.8, 8, 1e-12) {
        let _ = writeln!(summary, "tail_residual_decreasing = {}", t.decreasing);
        let _ = writeln!(summary, "tail_log_slope = {:?}", t.log_slope);
    }
    fs::write(out.join("summary.txt"), &summary)?;
    let report_text = write_reports(out, &reports)?;
    // Only the range and positivity checks stay hard once the step leaves the guaranteed range.
    outcome.failed = if beyond {
        reports[0].assertions.iter().skip(1).any(|a| !a.pass)
    } else {
        reports.iter().any(|r| !r.passed())
    };
    outcome.text = format!("{summary}\n{report_text}");
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub workers: usize,
    pub wallclock_s: f64,
    pub updates: usize,
    pub final_f: f64,
    pub q_observed: Option<u64>,
    pub valid: bool,
    pub reached_target: Option<bool>,
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let base = rows.iter().find(|r| r.workers == 1).or(rows.first()).map(|r| r.wallclock_s);
    let mut s = String::from("workers,wallclock_s,updates,updates_per_s,final_f,q_observed,valid,reached_target,speedup\n");
    for r in rows {
        let speed = base.map_or(f64::NAN, |b| b / r.wallclock_s);
        let _ = writeln!(
            s,
            "{},{:?},{},{:?},{:?},{},{},{},{:?}",
            r.workers,
            r.wallclock_s,
            r.updates,
            r.updates as f64 / r.wallclock_s,
            r.final_f,
            r.q_observed.map_or("none".into(), |q| q.to_string()),
            r.valid,
            r.reached_target.map_or("none".into(), |b| b.to_string()),
            speed
        );
    }
    s
}

pub fn cmd_bench(cfg: &RunConfig, out: &Path, ov: &Overrides) -> Result<Outcome> {
    if !matches!(cfg.solver.engine, EngineKind::Pacd | EngineKind::Sacd) {
        return Err(AcdError::invalid("bench needs a parallel engine (pacd or sacd)"));
    }
    let problem = cfg.build_problem()?;
    let mut outcome = Outcome::default();
    let mut counts = cfg.bench.workers.clone();
    if let Some(cap) = ov.workers {
        counts.retain(|&w| w <= cap);
    }
    if counts.is_empty() || counts.contains(&0) {
        return Err(AcdError::invalid("bench needs at least one positive worker count"));
    }
    let base_ov = Overrides { workers: None, ..ov.clone() };
    let (rule, a) = resolve_engine(cfg, &problem, &base_ov)?;
    let gamma = pick_gamma(cfg, rule, ov, &mut outcome.warnings)?;
    let seed = ov.seed.or(cfg.seed).unwrap_or(0);
    let f0 = problem.value(&vec![0.0; problem.dim()]);
    fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    for &w in &counts {
        let mut a = a.clone().expect("parallel engines carry settings");
        a.workers = w;
        a.validate(problem.dim())?;
        let start = Instant::now();
        let result = execute(cfg, &problem, gamma, Some(&a), seed);
        let wall = start.elapsed().as_secs_f64();
        let (trace, mut valid) = match result {
            Ok(t) => (t, true),
            Err(AcdError::Aborted { partial, .. }) => (*partial, false),
            Err(e) => return Err(e),
        };
        let q_observed = measure_interference(&trace).ok().map(|r| r.q_observed);
        if q_observed.is_some_and(|q| q > a.q) && a.enforcement.interference {
            valid = false;
        }
        let final_f = problem.value(&trace.final_x);
        rows.push(BenchRow {
            workers: w,
            wallclock_s: wall,
            updates: trace.len(),
            final_f,
            q_observed,
            valid,
            reached_target: cfg.bench.target_ratio.map(|r| final_f <= r * f0),
        });
    }
    let csv = bench_csv(&rows);
    fs::write(out.join("bench.csv"), &csv)?;
    // Speedup is reported only; invalid rows and missed targets fail the run.
    for r in rows.iter().filter(|r| !r.valid || r.reached_target == Some(false)) {
        outcome.warnings.push(format!("workers = {}: valid = {}, reached_target = {:?}", r.workers, r.valid, r.reached_target));
    }
    outcome.failed = rows.iter().any(|r| !r.valid || r.reached_target == Some(false));
    outcome.text = csv;
    Ok(outcome)
}
