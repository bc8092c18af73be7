#ifndef ACD_H
#define ACD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Status codes returned by every fallible call.
typedef enum AcdStatus {
  ACD_STATUS_OK = 0,
  ACD_STATUS_NULL_POINTER = 1,
  ACD_STATUS_INVALID_PARAMETER = 2,
  ACD_STATUS_DOMAIN = 3,
  ACD_STATUS_NON_FINITE = 4,
  ACD_STATUS_CORRUPT_TRACE = 5,
  ACD_STATUS_ENFORCEMENT = 6,
  ACD_STATUS_UNSUPPORTED = 7,
  ACD_STATUS_WORKER = 8,
  ACD_STATUS_PARSE = 9,
  // The run stopped early; the output handle holds the partial trace.
  ACD_STATUS_ABORTED = 10,
  ACD_STATUS_IO = 11,
  // The call completed but an audit found a violated invariant.
  ACD_STATUS_AUDIT_FAILED = 12,
  ACD_STATUS_PANIC = 13,
} AcdStatus;

// Opaque market handle.
typedef struct AcdMarket AcdMarket;

// Opaque problem handle.
typedef struct AcdProblem AcdProblem;

// Opaque solver trace handle.
typedef struct AcdTrace AcdTrace;

// One committed update of a trace.
typedef struct AcdRecord {
  uint64_t t;
  uint64_t coordinate;
  double delta;
  double stale_gradient;
  double gamma;
  uint64_t started_snapshot;
} AcdRecord;

// Summary of an asynchronous tatonnement run.
typedef struct AcdMarketSummary {
  uint64_t updates;
  double initial_residual;
  double final_residual;
  double initial_potential;
  double final_potential;
} AcdMarketSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf`.
//
// Returns the length needed including the NUL. Empty after a successful call.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t acd_last_error_message(char *buf, size_t cap);

// Library version as a static NUL-terminated string.
const char *acd_version(void);

// Builds a problem from a problem-file TOML document.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum AcdStatus acd_problem_from_toml(const char *toml, struct AcdProblem **out);

// Random ridge regression instance of dimension `n`.
//
// # Safety
// `out` must be writable.
enum AcdStatus acd_problem_ridge(size_t n,
                                 uint64_t seed,
                                 double curvature,
                                 struct AcdProblem **out);

// # Safety
// `problem` must be null or a handle from this library not yet freed.
void acd_problem_free(struct AcdProblem *problem);

// Dimension of the problem, or 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
size_t acd_problem_dim(const struct AcdProblem *problem);

// Objective value at `x` (length `n`).
//
// # Safety
// `x` must point to `n` readable values; `out` must be writable.
enum AcdStatus acd_problem_value(const struct AcdProblem *problem,
                                 const double *x,
                                 size_t n,
                                 double *out);

// Runs the engine described by a run-config TOML document (its `seed`,
// `[solver]` and `[async]` tables; any problem table is ignored) on
// `problem`. A negative `seed` keeps the config's seed. With `force` set,
// parameters outside their guaranteed range run anyway.
//
// On `ACD_ABORTED` `*out` holds the partial trace and must still be freed.
//
// # Safety
// `config_toml` must be a NUL-terminated string; `out` must be writable.
enum AcdStatus acd_solve(const struct AcdProblem *problem,
                         const char *config_toml,
                         int64_t seed,
                         bool force,
                         struct AcdTrace **out);

// Parses a trace in the text export format.
//
// # Safety
// `trace_text` must be a NUL-terminated string; `out` must be writable.
enum AcdStatus acd_trace_parse(const char *trace_text, struct AcdTrace **out);

// # Safety
// `trace` must be null or a handle from this library not yet freed.
void acd_trace_free(struct AcdTrace *trace);

// Number of committed updates, or 0 for a null handle.
//
// # Safety
// `trace` must be null or a live handle.
size_t acd_trace_len(const struct AcdTrace *trace);

// Step-size parameter the trace was run with, or NaN for a null handle.
//
// # Safety
// `trace` must be null or a live handle.
double acd_trace_gamma(const struct AcdTrace *trace);

// Copies update `index` (0-based) into `*out`.
//
// # Safety
// `out` must be writable.
enum AcdStatus acd_trace_record(const struct AcdTrace *trace, size_t index, struct AcdRecord *out);

// Copies the final iterate into `x` (exactly the problem dimension).
//
// # Safety
// `x` must point to `n` writable values.
enum AcdStatus acd_trace_final_x(const struct AcdTrace *trace, double *x, size_t n);

// Objective value at the final iterate, recomputed from the replayed trace.
//
// # Safety
// Handles must be live; `out` must be writable.
enum AcdStatus acd_trace_final_value(const struct AcdProblem *problem,
                                     const struct AcdTrace *trace,
                                     double *out);

// Writes the trace in the text export format. Returns the length needed
// including the NUL, or 0 for a null handle.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t acd_trace_format(const struct AcdTrace *trace, char *buf, size_t cap);

// Replays the trace against `problem` and runs the invariant audits.
// Returns `ACD_AUDIT_FAILED` with the violated checks in the error message
// when any fails.
//
// # Safety
// Handles must be live.
enum AcdStatus acd_trace_audit(const struct AcdProblem *problem, const struct AcdTrace *trace);

// Builds a market from a market-file TOML document.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum AcdStatus acd_market_from_toml(const char *toml, struct AcdMarket **out);

// # Safety
// `market` must be null or a handle from this library not yet freed.
void acd_market_free(struct AcdMarket *market);

// Number of goods, or 0 for a null handle.
//
// # Safety
// `market` must be null or a live handle.
size_t acd_market_goods(const struct AcdMarket *market);

// Excess demand at prices `p`, written to `z`; both have `goods` entries.
//
// # Safety
// `p` and `z` must point to `goods` values.
enum AcdStatus acd_market_excess_demand(const struct AcdMarket *market,
                                        const double *p,
                                        double *z,
                                        size_t goods);

// Simulates asynchronous tatonnement with the market file's settings.
//
// `p0` may be null to use the file's start prices (or all ones). A positive
// `lambda` or `horizon` overrides the file, a negative `seed` keeps it.
// Step factors above 1/37 need `force`. Final prices go to `prices_out`
// (`goods` entries) and the run summary to `summary` (may be null).
//
// # Safety
// `p0` must be null or point to `goods` values; `prices_out` must point to
// `goods` writable values.
enum AcdStatus acd_market_run(const struct AcdMarket *market,
                              const double *p0,
                              double lambda,
                              double horizon,
                              int64_t seed,
                              bool force,
                              double *prices_out,
                              size_t goods,
                              struct AcdMarketSummary *summary);

// Equilibrium residual at prices `p` with the default price tolerance.
//
// # Safety
// `p` must point to `goods` values; `out` must be writable.
enum AcdStatus acd_market_residual(const struct AcdMarket *market,
                                   const double *p,
                                   size_t goods,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACD_H */
