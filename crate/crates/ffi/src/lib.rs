//! C ABI over `acd-core`.
//!
//! Objects cross the boundary as opaque handles (`AcdProblem`, `AcdTrace`,
//! `AcdMarket`) created by the `acd_problem_*`, `acd_solve`, `acd_trace_parse`
//! and `acd_market_from_toml` constructors and released with the matching
//! `acd_*_free`. Every fallible function returns an
//! `AcdStatus`; on anything but `ACD_STATUS_OK` the message is available from
//! `acd_last_error_message` on the same thread. Strings are copied into
//! caller buffers: functions taking `(buf, cap)` return the length the full
//! string needs including its terminating NUL, and write a truncated,
//! NUL-terminated prefix when `cap` is smaller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use acd_core::analysis::{replay_objective, Report};
use acd_core::cli::{audit_trace, run_solver, Overrides, RunConfig};
use acd_core::engine::{format_trace, parse_trace, Trace};
use acd_core::market::{
    async_tatonnement_run, default_tol_price, equilibrium_residual, excess_demand, parse_market, FisherMarket,
    TatonnementConfig, MAX_GUARANTEED_LAMBDA,
};
use acd_core::problems::{make_ridge, parse_problem, CompositeProblem};
use acd_core::AcdError;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    NonFinite = 4,
    CorruptTrace = 5,
    Enforcement = 6,
    Unsupported = 7,
    Worker = 8,
    Parse = 9,
    /// The run stopped early; the output handle holds the partial trace.
    Aborted = 10,
    Io = 11,
    /// The call completed but an audit found a violated invariant.
    AuditFailed = 12,
    Panic = 13,
}

/// Opaque problem handle.
pub struct AcdProblem {
    inner: CompositeProblem,
}

/// Opaque solver trace handle.
pub struct AcdTrace {
    inner: Trace,
}

/// Opaque market handle.
pub struct AcdMarket {
    inner: FisherMarket,
    /// Start prices from the market file, if it had any.
    start: Option<Vec<f64>>,
    config: TatonnementConfig,
}

/// One committed update of a trace.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AcdRecord {
    pub t: u64,
    pub coordinate: u64,
    pub delta: f64,
    pub stale_gradient: f64,
    pub gamma: f64,
    pub started_snapshot: u64,
}

/// Summary of an asynchronous tatonnement run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AcdMarketSummary {
    pub updates: u64,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub initial_potential: f64,
    pub final_potential: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &AcdError) -> AcdStatus {
    match e {
        AcdError::InvalidParameter(_) => AcdStatus::InvalidParameter,
        AcdError::Domain(_) => AcdStatus::Domain,
        AcdError::NonFinite { .. } => AcdStatus::NonFinite,
        AcdError::CorruptTrace(_) => AcdStatus::CorruptTrace,
        AcdError::Enforcement(_) => AcdStatus::Enforcement,
        AcdError::Unsupported(_) => AcdStatus::Unsupported,
        AcdError::Worker(_) => AcdStatus::Worker,
        AcdError::Parse(_) => AcdStatus::Parse,
        AcdError::Aborted { .. } => AcdStatus::Aborted,
        AcdError::Io(_) => AcdStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Core(AcdError),
    Status(AcdStatus, String),
}

impl From<AcdError> for Fail {
    fn from(e: AcdError) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AcdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AcdStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            AcdStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            AcdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(AcdError::Parse(format!("{what} is not valid UTF-8"))))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn copy_str(s: &str, buf: *mut c_char, cap: usize) -> usize {
    let bytes = s.as_bytes();
    if !buf.is_null() && cap > 0 {
        let n = bytes.len().min(cap - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
        *buf.add(n) = 0;
    }
    bytes.len() + 1
}

unsafe fn copy_values(src: &[f64], out: *mut f64, len: usize) -> Result<(), Fail> {
    if len != src.len() {
        return Err(Fail::Core(AcdError::InvalidParameter(format!(
            "buffer holds {len} values, {} needed",
            src.len()
        ))));
    }
    if len > 0 {
        if out.is_null() {
            return Err(Fail::Null("output buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    }
    Ok(())
}

fn failure_text(reports: &[Report]) -> Option<String> {
    let bad: Vec<String> =
        reports.iter().flat_map(|r| r.failures()).map(|a| format!("{} lhs={:?} rhs={:?}", a.name, a.lhs, a.rhs)).collect();
    (!bad.is_empty()).then(|| format!("audit failed: {}", bad.join("; ")))
}

/// Copies the calling thread's last error message into `buf`.
///
/// Returns the length needed including the NUL. Empty after a successful call.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn acd_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| copy_str(&e.borrow(), buf, cap))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn acd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a problem from a problem-file TOML document.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acd_problem_from_toml(toml: *const c_char, out: *mut *mut AcdProblem) -> AcdStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let inner = parse_problem(text(toml, "toml")?)?;
        write_out(out, AcdProblem { inner });
        Ok(())
    })
}

/// Random ridge regression instance of dimension `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acd_problem_ridge(n: usize, seed: u64, curvature: f64, out: *mut *mut AcdProblem) -> AcdStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        write_out(out, AcdProblem { inner: make_ridge(n, seed, curvature)? });
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn acd_problem_free(problem: *mut AcdProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Dimension of the problem, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn acd_problem_dim(problem: *const AcdProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.dim())
}

/// Objective value at `x` (length `n`).
///
/// # Safety
/// `x` must point to `n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acd_problem_value(
    problem: *const AcdProblem,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> AcdStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        if n != p.dim() {
            return Err(AcdError::InvalidParameter(format!("x has {n} values, problem has {}", p.dim())).into());
        }
        *out = p.value(slice(x, n, "x")?);
        Ok(())
    })
}

/// Runs the engine described by a run-config TOML document (its `seed`,
/// `[solver]` and `[async]` tables; any problem table is ignored) on
/// `problem`. A negative `seed` keeps the config's seed. With `force` set,
/// parameters outside their guaranteed range run anyway.
///
/// On `ACD_ABORTED` `*out` holds the partial trace and must still be freed.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acd_solve(
    problem: *const AcdProblem,
    config_toml: *const c_char,
    seed: i64,
    force: bool,
    out: *mut *mut AcdTrace,
) -> AcdStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = ptr::null_mut();
        let cfg = RunConfig::parse(text(config_toml, "config_toml")?)?;
        let ov = Overrides { seed: u64::try_from(seed).ok(), workers: None, force };
        match run_solver(&cfg, p, &ov, &mut Vec::new()) {
            Ok(inner) => {
                write_out(out, AcdTrace { inner });
                Ok(())
            }
            Err(AcdError::Aborted { reason, partial }) => {
                write_out(out, AcdTrace { inner: *partial });
                Err(Fail::Status(AcdStatus::Aborted, format!("run aborted: {reason}")))
            }
            Err(e) => Err(e.into()),
        }
    })
}

/// Parses a trace in the text export format.
///
/// # Safety
/// `trace_text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acd_trace_parse(trace_text: *const c_char, out: *mut *mut AcdTrace) -> AcdStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        write_out(out, AcdTrace { inner: parse_trace(text(trace_text, "trace_text")?)? });
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn acd_trace_free(trace: *mut AcdTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of committed updates, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn acd_trace_len(trace: *const AcdTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.len())
}

/// Step-size parameter the trace was run with, or NaN for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn acd_trace_gamma(trace: *const AcdTrace) -> f64 {
    trace.as_ref().map_or(f64::NAN, |t| t.inner.gamma)
}

/// Copies update `index` (0-based) into `*out`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acd_trace_record(trace: *const AcdTrace, index: usize, out: *mut AcdRecord) -> AcdStatus {
    guard(|| {
        let t = &deref(trace, "trace")?.inner;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let r = t
            .records
            .get(index)
            .ok_or_else(|| AcdError::InvalidParameter(format!("record {index} of {}", t.len())))?;
        *out = AcdRecord {
            t: r.t,
            coordinate: r.k as u64,
            delta: r.delta,
            stale_gradient: r.g_tilde,
            gamma: r.gamma,
            started_snapshot: r.started_snapshot,
        };
        Ok(())
    })
}

/// Copies the final iterate into `x` (exactly the problem dimension).
///
/// # Safety
/// `x` must point to `n` writable values.
#[no_mangle]
pub unsafe extern "C" fn acd_trace_final_x(trace: *const AcdTrace, x: *mut f64, n: usize) -> AcdStatus {
    guard(|| copy_values(&deref(trace, "trace")?.inner.final_x, x, n))
}

/// Objective value at the final iterate, recomputed from the replayed trace.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acd_trace_final_value(
    problem: *const AcdProblem,
    trace: *const AcdTrace,
    out: *mut f64,
) -> AcdStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let t = &deref(trace, "trace")?.inner;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let replay = replay_objective(p, t)?;
        *out = *replay.f.last().unwrap_or(&f64::NAN);
        Ok(())
    })
}

/// Writes the trace in the text export format. Returns the length needed
/// including the NUL, or 0 for a null handle.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn acd_trace_format(trace: *const AcdTrace, buf: *mut c_char, cap: usize) -> usize {
    match trace.as_ref() {
        Some(t) => copy_str(&format_trace(&t.inner), buf, cap),
        None => 0,
    }
}

/// Replays the trace against `problem` and runs the invariant audits.
/// Returns `ACD_AUDIT_FAILED` with the violated checks in the error message
/// when any fails.
///
/// # Safety
/// Handles must be live.
#[no_mangle]
pub unsafe extern "C" fn acd_trace_audit(problem: *const AcdProblem, trace: *const AcdTrace) -> AcdStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let t = &deref(trace, "trace")?.inner;
        match failure_text(&audit_trace(p, t)?) {
            Some(msg) => Err(Fail::Status(AcdStatus::AuditFailed, msg)),
            None => Ok(()),
        }
    })
}

/// Builds a market from a market-file TOML document.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acd_market_from_toml(toml: *const c_char, out: *mut *mut AcdMarket) -> AcdStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let file = parse_market(text(toml, "toml")?)?;
        let inner = file.build()?;
        let start = match file.initial_prices.is_some() {
            true => Some(file.start_prices(&inner)?),
            false => None,
        };
        let config = file.tatonnement.clone().unwrap_or_default();
        write_out(out, AcdMarket { inner, start, config });
        Ok(())
    })
}

/// # Safety
/// `market` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn acd_market_free(market: *mut AcdMarket) {
    if !market.is_null() {
        drop(Box::from_raw(market));
    }
}

/// Number of goods, or 0 for a null handle.
///
/// # Safety
/// `market` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn acd_market_goods(market: *const AcdMarket) -> usize {
    market.as_ref().map_or(0, |m| m.inner.goods)
}

/// Excess demand at prices `p`, written to `z`; both have `goods` entries.
///
/// # Safety
/// `p` and `z` must point to `goods` values.
#[no_mangle]
pub unsafe extern "C" fn acd_market_excess_demand(
    market: *const AcdMarket,
    p: *const f64,
    z: *mut f64,
    goods: usize,
) -> AcdStatus {
    guard(|| {
        let m = &deref(market, "market")?.inner;
        if goods != m.goods {
            return Err(AcdError::InvalidParameter(format!("{goods} prices for {} goods", m.goods)).into());
        }
        copy_values(&excess_demand(m, slice(p, goods, "p")?)?, z, goods)
    })
}

/// Simulates asynchronous tatonnement with the market file's settings.
///
/// `p0` may be null to use the file's start prices (or all ones). A positive
/// `lambda` or `horizon` overrides the file, a negative `seed` keeps it.
/// Step factors above 1/37 need `force`. Final prices go to `prices_out`
/// (`goods` entries) and the run summary to `summary` (may be null).
///
/// # Safety
/// `p0` must be null or point to `goods` values; `prices_out` must point to
/// `goods` writable values.
#[no_mangle]
pub unsafe extern "C" fn acd_market_run(
    market: *const AcdMarket,
    p0: *const f64,
    lambda: f64,
    horizon: f64,
    seed: i64,
    force: bool,
    prices_out: *mut f64,
    goods: usize,
    summary: *mut AcdMarketSummary,
) -> AcdStatus {
    guard(|| {
        let m = deref(market, "market")?;
        if goods != m.inner.goods {
            return Err(AcdError::InvalidParameter(format!("{goods} prices for {} goods", m.inner.goods)).into());
        }
        let start = match (p0.is_null(), &m.start) {
            (false, _) => slice(p0, goods, "p0")?.to_vec(),
            (true, Some(s)) => s.clone(),
            (true, None) => vec![1.0; goods],
        };
        let mut cfg = m.config.clone();
        if lambda > 0.0 {
            cfg.lambda = lambda;
        }
        if horizon > 0.0 {
            cfg.horizon = horizon;
        }
        if let Ok(s) = u64::try_from(seed) {
            cfg.seed = s;
        }
        if force && cfg.lambda > MAX_GUARANTEED_LAMBDA {
            cfg.allow_large_step = true;
        }
        let trace = async_tatonnement_run(&m.inner, &start, &cfg)?;
        copy_values(&trace.final_prices, prices_out, goods)?;
        if let Some(s) = summary.as_mut() {
            *s = AcdMarketSummary {
                updates: trace.events.len() as u64,
                initial_residual: trace.residual0,
                final_residual: trace.final_residual(),
                initial_potential: trace.phi0,
                final_potential: trace.events.last().map_or(trace.phi0, |e| e.phi_after),
            };
        }
        Ok(())
    })
}

/// Equilibrium residual at prices `p` with the default price tolerance.
///
/// # Safety
/// `p` must point to `goods` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acd_market_residual(
    market: *const AcdMarket,
    p: *const f64,
    goods: usize,
    out: *mut f64,
) -> AcdStatus {
    guard(|| {
        let m = &deref(market, "market")?.inner;
        if goods != m.goods {
            return Err(AcdError::InvalidParameter(format!("{goods} prices for {} goods", m.goods)).into());
        }
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let p = slice(p, goods, "p")?;
        *out = equilibrium_residual(m, p, default_tol_price(p))?;
        Ok(())
    })
}
