/* C interface to the rising-bandits simulator. Generated by cbindgen; do not edit. */

#ifndef RISING_BANDITS_H
#define RISING_BANDITS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible FFI call.
typedef enum RbStatus {
  RB_STATUS_OK = 0,
  // A required pointer argument was null.
  RB_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  RB_STATUS_INVALID_UTF8 = 2,
  // The JSON did not describe a valid experiment config.
  RB_STATUS_BAD_CONFIG = 3,
  // The JSON did not describe a valid payoff curve.
  RB_STATUS_BAD_CURVE = 4,
  // The simulation itself failed.
  RB_STATUS_RUN_FAILED = 5,
  // A policy/replication/arm index was out of range.
  RB_STATUS_OUT_OF_RANGE = 6,
  // Writing result files failed.
  RB_STATUS_IO = 7,
} RbStatus;

// Opaque experiment configuration.
typedef struct RbConfig RbConfig;

// Opaque payoff curve.
typedef struct RbCurve RbCurve;

// Opaque simulation result (owns its config snapshot and label storage).
typedef struct RbResult RbResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread. The pointer
// stays valid until the next failing call on the same thread.
const char *rb_last_error(void);

// Crate version as a static NUL-terminated string.
const char *rb_version(void);

// Parses and validates an experiment config from JSON. On success `*out`
// owns a new config; release it with `rb_config_free`.
enum RbStatus rb_config_from_json(const char *json, struct RbConfig **out);

void rb_config_free(struct RbConfig *config);

// Overrides the master seed.
enum RbStatus rb_config_set_seed(struct RbConfig *config, uint64_t seed);

// Overrides the replication count (must stay ≥ 1).
enum RbStatus rb_config_set_replications(struct RbConfig *config, uintptr_t replications);

// Runs the configured experiment. `threads == 0` uses one worker per core.
// On success `*out` owns the result; release it with `rb_result_free`.
enum RbStatus rb_run(const struct RbConfig *config, uintptr_t threads, struct RbResult **out);

void rb_result_free(struct RbResult *result);

enum RbStatus rb_result_policy_count(const struct RbResult *result, uintptr_t *out);

enum RbStatus rb_result_replication_count(const struct RbResult *result, uintptr_t *out);

// Label of one policy. The pointer borrows from the result and stays valid
// until `rb_result_free`.
enum RbStatus rb_result_policy_label(const struct RbResult *result,
                                     uintptr_t policy,
                                     const char **out);

// Final cumulative regret of one (policy, replication) run.
enum RbStatus rb_result_final_regret(const struct RbResult *result,
                                     uintptr_t policy,
                                     uintptr_t replication,
                                     double *out);

// Final cumulative regret averaged over replications.
enum RbStatus rb_result_mean_final_regret(const struct RbResult *result,
                                          uintptr_t policy,
                                          double *out);

// Writes the standard output files (results.csv, final.csv, manifest.json)
// into `dir`, creating it if needed.
enum RbStatus rb_result_write(const struct RbResult *result, const char *dir);

// Parses a payoff curve from its JSON description
// (e.g. `{"kind":"exponential","c":0.8,"a":0.01}`).
enum RbStatus rb_curve_from_json(const char *json, struct RbCurve **out);

void rb_curve_free(struct RbCurve *curve);

// Expected payoff after `n` pulls (rested) or at round `n` (restless).
enum RbStatus rb_curve_eval(const struct RbCurve *curve, uintptr_t n, double *out);

// Whether the curve is non-decreasing and concave over the first
// `horizon` pulls.
enum RbStatus rb_curve_is_rising(const struct RbCurve *curve, uintptr_t horizon, bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RISING_BANDITS_H */
