#ifndef WCLS_H
#define WCLS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a call.
typedef enum WclsStatus {
  WCLS_STATUS_OK = 0,
  WCLS_STATUS_NULL_POINTER = 1,
  // A string argument is not valid UTF-8 or an index is out of range.
  WCLS_STATUS_INVALID_ARGUMENT = 2,
  WCLS_STATUS_CONFIG = 3,
  WCLS_STATUS_DATA = 4,
  // Estimation failed: separation, singular system, positivity.
  WCLS_STATUS_MODEL = 5,
  WCLS_STATUS_SIMULATION = 6,
  WCLS_STATUS_IO = 7,
  WCLS_STATUS_PANIC = 8,
} WclsStatus;

// A validated panel dataset.
typedef struct WclsDataset WclsDataset;

// Outcomes of one or more analyses on a dataset.
typedef struct WclsEstimate WclsEstimate;

// A replication report for every scenario group of a simulation config.
typedef struct WclsSimulation WclsSimulation;

// One row of a contrast test.
typedef struct WclsContrastRow {
  double estimate;
  double se;
  size_t df;
  double ci_lower;
  double ci_upper;
  double t_statistic;
  double p_value;
} WclsContrastRow;

// Summary of one analysis over the replicates of one scenario.
typedef struct WclsSimulationRow {
  size_t n;
  size_t occasions;
  double beta11;
  double truth;
  double mean;
  // NaN when fewer than two replicates succeeded.
  double sd;
  double avg_se;
  double rmse;
  double cp;
  size_t successes;
  size_t failures;
} WclsSimulationRow;

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into this library on the same thread.
const char *wcls_last_error_message(void);

// Stable machine-readable code of the last failure (e.g. `missing_column`), or NULL.
const char *wcls_last_error_code(void);

// Library version as a static string.
const char *wcls_version(void);

// Read a long-format CSV. `schema_toml` names the columns and may be NULL
// for the defaults (`id`, `t`, `avail`, `trt`, `y`).
//
// # Safety
// String arguments must be NULL or NUL-terminated; `out` must be writable.
enum WclsStatus wcls_dataset_from_csv(const char *path,
                                      const char *schema_toml,
                                      struct WclsDataset **out);

// Number of individuals, or 0 for NULL.
//
// # Safety
// `dataset` must be NULL or a live handle.
size_t wcls_dataset_individuals(const struct WclsDataset *dataset);

// Occasions per individual, or 0 for NULL.
//
// # Safety
// `dataset` must be NULL or a live handle.
size_t wcls_dataset_occasions(const struct WclsDataset *dataset);

// # Safety
// `dataset` must be NULL or a handle not yet freed.
void wcls_dataset_free(struct WclsDataset *dataset);

// Run the `[[analysis]]` tables of `config_toml` on a dataset. Top-level
// keys `alpha0`, `small_sample` and `one_sided` are optional.
//
// # Safety
// `dataset` must be a live handle, `config_toml` NUL-terminated and `out` writable.
enum WclsStatus wcls_estimate(const struct WclsDataset *dataset,
                              const char *config_toml,
                              struct WclsEstimate **out);

// Contrast rows across all analyses, in configuration order.
//
// # Safety
// `result` must be NULL or a live handle.
size_t wcls_estimate_row_count(const struct WclsEstimate *result);

// # Safety
// `result` must be a live handle and `row` writable.
enum WclsStatus wcls_estimate_row(const struct WclsEstimate *result,
                                  size_t i,
                                  struct WclsContrastRow *row);

// Analysis name of row `i`, or NULL. Valid while `result` lives.
//
// # Safety
// `result` must be NULL or a live handle.
const char *wcls_estimate_analysis_name(const struct WclsEstimate *result, size_t i);

// Contrast name of row `i`, or NULL. Valid while `result` lives.
//
// # Safety
// `result` must be NULL or a live handle.
const char *wcls_estimate_contrast_name(const struct WclsEstimate *result, size_t i);

// Full outcome including nuisance fits and diagnostics as JSON. Free the
// string with [`wcls_string_free`]. NULL on failure.
//
// # Safety
// `result` must be NULL or a live handle.
char *wcls_estimate_to_json(const struct WclsEstimate *result);

// # Safety
// `result` must be NULL or a handle not yet freed.
void wcls_estimate_free(struct WclsEstimate *result);

// Run a simulation config (a preset or an explicit generative model).
// `seed` may be NULL to use the config's seed; `replicates` and `threads`
// of 0 mean the config value and the global pool.
//
// # Safety
// `config_toml` must be NUL-terminated, `seed` NULL or readable, `out` writable.
enum WclsStatus wcls_simulate(const char *config_toml,
                              const uint64_t *seed,
                              size_t replicates,
                              size_t threads,
                              struct WclsSimulation **out);

// Rows across all scenario groups.
//
// # Safety
// `sim` must be NULL or a live handle.
size_t wcls_simulation_row_count(const struct WclsSimulation *sim);

// # Safety
// `sim` must be a live handle and `row` writable.
enum WclsStatus wcls_simulation_row(const struct WclsSimulation *sim,
                                    size_t i,
                                    struct WclsSimulationRow *row);

// Scenario group label of row `i`, or NULL. Valid while `sim` lives.
//
// # Safety
// `sim` must be NULL or a live handle.
const char *wcls_simulation_group(const struct WclsSimulation *sim, size_t i);

// Analysis name of row `i`, or NULL. Valid while `sim` lives.
//
// # Safety
// `sim` must be NULL or a live handle.
const char *wcls_simulation_analysis_name(const struct WclsSimulation *sim, size_t i);

// The replication reports as JSON; free with [`wcls_string_free`].
//
// # Safety
// `sim` must be NULL or a live handle.
char *wcls_simulation_to_json(const struct WclsSimulation *sim);

// # Safety
// `sim` must be NULL or a handle not yet freed.
void wcls_simulation_free(struct WclsSimulation *sim);

// Release a string returned by this library.
//
// # Safety
// `s` must be NULL or a string from a `_to_json` function, not yet freed.
void wcls_string_free(char *s);

#endif  /* WCLS_H */
