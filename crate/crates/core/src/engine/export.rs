//! Line-delimited trace files and run summaries.
//!
//! ```text
//! # engine = pacd
//! # gamma = 36.95041722813605
//! # ...one `# key = value` line per header field...
//! t,k,dx,g_tilde,gamma,started_snapshot,ns
//! 1,0,-0.0123,0.456,36.95041722813605,0,1834
//! ```
//!
//! Reals use Rust's shortest round-trip formatting, so parsing a written file
//! gives back identical bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{AcdError, Result};
use crate::problems::{CompositeProblem, ProblemFile};

use super::{measure_interference, AsyncConfig, Enforcement, EngineKind, Schedule, Trace, UpdateRecord};

const COLUMNS: &str = "t,k,dx,g_tilde,gamma,started_snapshot,ns";

pub(crate) fn label(problem: &CompositeProblem) -> String {
    match ProblemFile::describe(problem) {
        Ok(ProblemFile::Ridge { n, seed, curvature }) => format!("ridge n={n} seed={seed} curvature={curvature:?}"),
        Ok(ProblemFile::Lasso { n, seed, reg_weight }) => format!("lasso n={n} seed={seed} reg_weight={reg_weight:?}"),
        Ok(ProblemFile::Sparse { n, degree, seed }) => format!("sparse n={n} degree={degree} seed={seed}"),
        Ok(ProblemFile::LowerBound { n }) => format!("lower_bound n={n}"),
        _ => format!("explicit n={}", problem.dim()),
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

fn schedule_name(s: Schedule) -> &'static str {
    match s {
        Schedule::PartitionedCyclic => "partitioned_cyclic",
        Schedule::UniformRandom => "uniform_random",
    }
}

pub fn format_trace(trace: &Trace) -> String {
    let c = &trace.config;
    let e = c.enforcement;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "# {k} = {v}");
    };
    kv("engine", trace.engine.name().into());
    kv("gamma", format!("{:?}", trace.gamma));
    kv("problem", trace.problem_label.clone());
    kv("workers", c.workers.to_string());
    kv("q", c.q.to_string());
    kv("r", c.r.to_string());
    kv("kappa_max", c.kappa_max.to_string());
    kv("schedule", schedule_name(c.schedule).into());
    kv("t_bar", c.t_bar.to_string());
    kv("epochs", c.epochs.to_string());
    kv("seed", c.seed.to_string());
    kv(
        "enforcement",
        format!("{} {} {} {}", e.admission, e.interference, e.window, e.pseudo_rounds),
    );
    kv("drain_start", trace.drain_start.map_or("none".into(), |d| d.to_string()));
    kv("failure", trace.failure.clone().unwrap_or_else(|| "none".into()));
    kv("x0", join(&trace.x0));
    kv("final_x", join(&trace.final_x));
    s.push_str(COLUMNS);
    s.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{},{:?},{:?},{:?},{},{}",
            r.t, r.k, r.delta, r.g_tilde, r.gamma, r.started_snapshot, r.ns
        );
    }
    s
}

pub fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    fs::write(path, format_trace(trace))?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    parse_trace(&fs::read_to_string(path)?)
}

fn bad(msg: impl Into<String>) -> AcdError {
    AcdError::CorruptTrace(msg.into())
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| bad(format!("bad {what}: {s:?}")))
}

fn reals(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split_whitespace().map(|v| num(v, what)).collect()
}

pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut header = std::collections::HashMap::new();
    let mut lines = text.lines();
    for line in lines.by_ref() {
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest.split_once('=').ok_or_else(|| bad(format!("bad header line {line:?}")))?;
            header.insert(k.trim().to_string(), v.trim().to_string());
        } else if line.trim() == COLUMNS {
            break;
        } else {
            return Err(bad(format!("expected header or column line, got {line:?}")));
        }
    }
    let get = |k: &str| header.get(k).map(String::as_str).ok_or_else(|| bad(format!("missing header {k}")));
    let flags: Vec<bool> = get("enforcement")?
        .split_whitespace()
        .map(|v| num(v, "enforcement flag"))
        .collect::<Result<_>>()?;
    if flags.len() != 4 {
        return Err(bad("enforcement needs four flags"));
    }
    let schedule = match get("schedule")? {
        "partitioned_cyclic" => Schedule::PartitionedCyclic,
        "uniform_random" => Schedule::UniformRandom,
        s => return Err(bad(format!("unknown schedule {s:?}"))),
    };
    let config = AsyncConfig {
        workers: num(get("workers")?, "workers")?,
        q: num(get("q")?, "q")?,
        r: num(get("r")?, "r")?,
        kappa_max: num(get("kappa_max")?, "kappa_max")?,
        schedule,
        t_bar: num(get("t_bar")?, "t_bar")?,
        epochs: num(get("epochs")?, "epochs")?,
        seed: num(get("seed")?, "seed")?,
        enforcement: Enforcement {
            admission: flags[0],
            interference: flags[1],
            window: flags[2],
            pseudo_rounds: flags[3],
        },
    };
    let mut records = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("record needs 7 fields: {line:?}")));
        }
        records.push(UpdateRecord {
            t: num(f[0], "t")?,
            k: num(f[1], "k")?,
            delta: num(f[2], "dx")?,
            g_tilde: num(f[3], "g_tilde")?,
            gamma: num(f[4], "gamma")?,
            started_snapshot: num(f[5], "started_snapshot")?,
            ns: num(f[6], "ns")?,
        });
    }
    let trace = Trace {
        engine: EngineKind::parse(get("engine")?)?,
        gamma: num(get("gamma")?, "gamma")?,
        config,
        x0: reals(get("x0")?, "x0")?,
        final_x: reals(get("final_x")?, "final_x")?,
        records,
        drain_start: match get("drain_start")? {
            "none" => None,
            v => Some(num(v, "drain_start")?),
        },
        problem_label: get("problem")?.to_string(),
        failure: match get("failure")? {
            "none" => None,
            v => Some(v.to_string()),
        },
    };
    trace.check_dense()?;
    if trace.records.iter().any(|r| r.k >= trace.x0.len() || r.started_snapshot >= r.t) {
        return Err(bad("record coordinate or snapshot out of range"));
    }
    if trace.final_x.len() != trace.x0.len() {
        return Err(bad("x0 and final_x lengths differ"));
    }
    Ok(trace)
}

/// `key = value` lines: final objective, update count, wall clock, interference.
pub fn summary_block(trace: &Trace, problem: &CompositeProblem) -> String {
    let mut s = String::new();
    let f0 = problem.value(&trace.x0);
    let f = problem.value(&trace.final_x);
    let _ = writeln!(s, "engine = {}", trace.engine.name());
    let _ = writeln!(s, "problem = {}", trace.problem_label);
    let _ = writeln!(s, "gamma = {:?}", trace.gamma);
    let _ = writeln!(s, "updates = {}", trace.len());
    let _ = writeln!(s, "initial_f = {f0:?}");
    let _ = writeln!(s, "final_f = {f:?}");
    if let Some(opt) = &problem.optimum {
        let _ = writeln!(s, "optimum_f = {:?}", opt.value);
        let _ = writeln!(s, "final_gap = {:?}", f - opt.value);
    }
    let wall = trace.records.last().map_or(0, |r| r.ns);
    let _ = writeln!(s, "wallclock_ns = {wall}");
    match measure_interference(trace) {
        Ok(rep) => {
            let _ = writeln!(s, "q_observed = {}", rep.q_observed);
            let _ = writeln!(s, "q_observed_with_drain = {}", rep.q_observed_all);
            if let Some(w) = rep.window {
                let _ = writeln!(s, "window_min_count = {}", w.min_count);
                let _ = writeln!(s, "window_max_count = {}", w.max_count);
            }
        }
        Err(_) => {
            let _ = writeln!(s, "q_observed = none");
        }
    }
    if let Some(fail) = &trace.failure {
        let _ = writeln!(s, "failure = {fail}");
    }
    s
}
