#ifndef PEEKSCHED_H
#define PEEKSCHED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PeekschedStatus {
  PEEKSCHED_STATUS_OK = 0,
  PEEKSCHED_STATUS_NULL_ARGUMENT = 1,
  PEEKSCHED_STATUS_INVALID_ARGUMENT = 2,
  PEEKSCHED_STATUS_CONFIG_ERROR = 3,
  PEEKSCHED_STATUS_RUNTIME_ERROR = 4,
  PEEKSCHED_STATUS_PANIC = 5,
} PeekschedStatus;

// Opaque scenario handle.
typedef struct PeekschedScenario PeekschedScenario;

// Aggregate metrics of one trial.
typedef struct PeekschedTrialMetrics {
  double mean_utility;
  double mean_expected_accuracy;
  double mean_violation_ms;
  uint64_t violation_count;
  // Wall-clock milliseconds; not reproducible across runs.
  double scheduling_overhead_ms;
} PeekschedTrialMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next peeksched call on this thread.
const char *peeksched_last_error(void);

// Library version as a static NUL-terminated string.
const char *peeksched_version(void);

// Creates a handle for a built-in scenario (`fall`, `voice`, `heart`,
// `default_trio`).
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum PeekschedStatus peeksched_scenario_builtin(const char *name, struct PeekschedScenario **out);

// # Safety
// `scenario` must come from this library and not be used afterwards. Null
// is ignored.
void peeksched_scenario_free(struct PeekschedScenario *scenario);

// Sets the mean per-request deadline offset, keeping the distribution's
// shape.
//
// # Safety
// `scenario` must be a live handle.
enum PeekschedStatus peeksched_scenario_set_deadline_mean(struct PeekschedScenario *scenario,
                                                          double mean_ms);

// Runs one seeded trial of a scheduler preset (`maxacc-edf`, `lo-edf`,
// `lo-priority`, `grouped`, `sneakpeek`) with default estimation settings.
//
// # Safety
// `scenario` must be a live handle, `preset` a NUL-terminated string and
// `out` a valid pointer.
enum PeekschedStatus peeksched_run_trial(const struct PeekschedScenario *scenario,
                                         const char *preset,
                                         uint32_t worker_count,
                                         uint64_t seed,
                                         struct PeekschedTrialMetrics *out);

// Deadline penalty in [0, 1] for `kind` (`step`, `linear`, `sigmoid`,
// `zero`).
//
// # Safety
// `kind` must be a NUL-terminated string and `out` a valid pointer.
enum PeekschedStatus peeksched_penalty(const char *kind,
                                       double deadline_ms,
                                       double completion_ms,
                                       double *out);

// Runs an experiment configuration (TOML text) and returns the CSV.
//
// # Safety
// `config` must be a NUL-terminated string and `csv_out` a valid pointer.
// On success `*csv_out` must be released with [`peeksched_string_free`].
enum PeekschedStatus peeksched_run_config(const char *config, char **csv_out);

// # Safety
// `s` must come from this library and not be used afterwards. Null is
// ignored.
void peeksched_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEEKSCHED_H */
