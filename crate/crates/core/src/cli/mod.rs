//! The `acd` command line: `solve`, `market`, `verify` and `bench`.
//!
//! Exit codes: 0 success, 1 a verification or hard invariant failed, 2 usage or I/O error.

mod commands;
mod config;
mod verify;

pub use commands::{audit_trace, bench_csv, cmd_bench, cmd_market, cmd_solve, resolve_engine, run_solver, BenchRow, Outcome, Overrides};
pub use config::{BenchSection, RunConfig, SolverSection, VerifySection};
pub use verify::{
    lower_bound_suite, budget_and_homogeneity, identity_suite, potential_gradient_fd, prox_suite, run_suite,
    smooth_gradient_fd, Suite,
};

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::AcdError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "acd", version, about = "Asynchronous coordinate descent and tatonnement toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a solver and audit its trace.
    Solve(RunArgs),
    /// Simulate asynchronous tatonnement on a market.
    Market(RunArgs),
    /// Run the property batteries.
    Verify(VerifyArgs),
    /// Sweep worker counts for a parallel solver.
    Bench(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "acd_out")]
    out: PathBuf,
    /// Run even when a step parameter is outside its guaranteed range.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "NAME", default_value = "all")]
    suite: String,
    #[arg(long, value_name = "N")]
    samples: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn usage_error(err: &mut dyn Write, e: &AcdError) -> i32 {
    let _ = writeln!(err, "error: {e}");
    EXIT_USAGE
}

fn code_for(e: &AcdError) -> i32 {
    match e {
        AcdError::Io(_) | AcdError::Parse(_) | AcdError::InvalidParameter(_) => EXIT_USAGE,
        _ => EXIT_FAILED,
    }
}

fn finish(outcome: commands::Outcome, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    for w in &outcome.warnings {
        let _ = writeln!(err, "{w}");
    }
    let _ = write!(out, "{}", outcome.text);
    if outcome.failed {
        EXIT_FAILED
    } else {
        EXIT_OK
    }
}

fn run_verify(args: VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(suite) = Suite::parse(&args.suite) else {
        let _ = writeln!(err, "error: unknown suite {:?}; expected one of {}", args.suite, Suite::NAMES.join(", "));
        return EXIT_USAGE;
    };
    let cfg = match &args.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => return usage_error(err, &e),
        },
        None => RunConfig::default(),
    };
    let samples = args.samples.unwrap_or(cfg.verify.samples);
    if samples == 0 {
        let _ = writeln!(err, "error: --samples must be >= 1");
        return EXIT_USAGE;
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let reports = match run_suite(suite, seed, samples) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return code_for(&e);
        }
    };
    let text: String = reports.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("\n");
    let _ = write!(out, "{text}");
    if let Some(dir) = &args.out {
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("verify.txt"), &text)) {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    }
    if reports.iter().all(|r| r.passed()) {
        EXIT_OK
    } else {
        for r in &reports {
            for a in r.failures() {
                let _ = writeln!(err, "violation: {} lhs={:?} rhs={:?}", a.name, a.lhs, a.rhs);
            }
        }
        EXIT_FAILED
    }
}

/// Parses `args` (including the program name) and runs the command, writing to
/// the given streams. Returns the process exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
            } else {
                let _ = write!(out, "{}", e.render());
            }
            return code;
        }
    };
    let (args, which): (RunArgs, fn(&RunConfig, &std::path::Path, &Overrides) -> crate::Result<Outcome>) =
        match cli.command {
            Command::Verify(v) => return run_verify(v, out, err),
            Command::Solve(a) => (a, cmd_solve),
            Command::Market(a) => (a, cmd_market),
            Command::Bench(a) => (a, cmd_bench),
        };
    let cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return usage_error(err, &e),
    };
    let ov = Overrides { seed: args.seed, workers: args.workers, force: args.force };
    match which(&cfg, &args.out, &ov) {
        Ok(o) => finish(o, out, err),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            code_for(&e)
        }
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
