#ifndef HLL_H
#define HLL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HllFamily {
  HLL_FAMILY_EXPONENTIAL = 0,
  HLL_FAMILY_GAMMA = 1,
  HLL_FAMILY_GEV = 2,
  /**
   * Fit every family and keep the one with the smallest KS statistic.
   */
  HLL_FAMILY_AUTO = 3,
} HllFamily;

typedef enum HllLatency {
  HLL_LATENCY_ENDORSE = 0,
  HLL_LATENCY_ORDER = 1,
  HLL_LATENCY_VALIDATE = 2,
  HLL_LATENCY_TOTAL = 3,
} HllLatency;

typedef enum HllStatus {
  HLL_STATUS_OK = 0,
  HLL_STATUS_NULL_POINTER = 1,
  HLL_STATUS_INVALID_ARGUMENT = 2,
  HLL_STATUS_PARAMETER_DOMAIN = 3,
  HLL_STATUS_FIT_FAILED = 4,
  HLL_STATUS_CONFIG = 5,
  HLL_STATUS_IO = 6,
  HLL_STATUS_BUFFER_TOO_SMALL = 7,
  HLL_STATUS_INTERNAL = 99,
} HllStatus;

typedef struct HllDistribution HllDistribution;

typedef struct HllFitReport HllFitReport;

typedef struct HllSimResult HllSimResult;

typedef struct HllKsResult {
  double statistic;
  double critical_value;
  double p_value;
  bool passed;
  size_t n;
} HllKsResult;

/**
 * Plain-data view of a fit report. Unused trailing `params` are zero.
 */
typedef struct HllFitSummary {
  enum HllFamily family;
  uint32_t n_params;
  double params[3];
  double ks_statistic;
  double ks_critical;
  double significance;
  bool passed;
  double empirical_mean;
  /**
   * NaN when the fitted distribution has no mean.
   */
  double bestfit_mean;
  size_t n;
} HllFitSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *hll_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hll_version(void);

/**
 * Parses `exp:λ`, `gamma:α,β` or `gev:ξ,σ,μ`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HllStatus hll_distribution_parse(const char *spec, struct HllDistribution **out);

/**
 * Builds a distribution from `n_params` parameters in the order of the
 * family's string form. `family` must not be `Auto`.
 *
 * # Safety
 * `params` must point to `n_params` doubles and `out` must be valid.
 */
enum HllStatus hll_distribution_new(enum HllFamily family,
                                    const double *params,
                                    size_t n_params,
                                    struct HllDistribution **out);

/**
 * # Safety
 * `d` must be null or a handle from this library not yet freed.
 */
void hll_distribution_free(struct HllDistribution *d);

/**
 * # Safety
 * `d` and `out` must be valid.
 */
enum HllStatus hll_distribution_pdf(const struct HllDistribution *d, double x, double *out);

/**
 * # Safety
 * `d` and `out` must be valid.
 */
enum HllStatus hll_distribution_cdf(const struct HllDistribution *d, double x, double *out);

/**
 * # Safety
 * `d` and `out` must be valid.
 */
enum HllStatus hll_distribution_mean(const struct HllDistribution *d, double *out);

/**
 * Writes the string form (`gamma:α,β`, ...) into `buf`, NUL-terminated.
 * `needed` receives the buffer size required, including the NUL.
 *
 * # Safety
 * `d` and `needed` must be valid; `buf` must hold `len` bytes or be null
 * when `len` is 0.
 */
enum HllStatus hll_distribution_to_string(const struct HllDistribution *d,
                                          char *buf,
                                          size_t len,
                                          size_t *needed);

/**
 * Fills `out[0..n]` with draws seeded by `seed`.
 *
 * # Safety
 * `d` must be valid and `out` must hold `n` doubles.
 */
enum HllStatus hll_distribution_sample(const struct HllDistribution *d,
                                       uint64_t seed,
                                       double *out,
                                       size_t n);

/**
 * One-sample KS test of `samples` against `d`.
 *
 * # Safety
 * `samples` must hold `n` doubles; `d` and `out` must be valid.
 */
enum HllStatus hll_ks_test(const double *samples,
                           size_t n,
                           const struct HllDistribution *d,
                           double significance,
                           struct HllKsResult *out);

/**
 * Fits `family` (or the best of all three with `Auto`) by maximum
 * likelihood and KS-tests the result at `significance`.
 *
 * # Safety
 * `samples` must hold `n` doubles and `out` must be valid.
 */
enum HllStatus hll_fit(const double *samples,
                       size_t n,
                       enum HllFamily family,
                       double significance,
                       struct HllFitReport **out);

/**
 * # Safety
 * `r` and `out` must be valid.
 */
enum HllStatus hll_fit_report_summary(const struct HllFitReport *r, struct HllFitSummary *out);

/**
 * A new handle to a copy of the fitted distribution.
 *
 * # Safety
 * `r` and `out` must be valid.
 */
enum HllStatus hll_fit_report_distribution(const struct HllFitReport *r,
                                           struct HllDistribution **out);

/**
 * # Safety
 * `r` must be null or a handle from this library not yet freed.
 */
void hll_fit_report_free(struct HllFitReport *r);

/**
 * Simulates `n_tx` transactions with the calibrated service models.
 *
 * # Safety
 * `out` must be valid.
 */
enum HllStatus hll_simulate(double lambda_t,
                            size_t block_size,
                            double block_timeout,
                            size_t n_tx,
                            uint64_t seed,
                            struct HllSimResult **out);

/**
 * Simulates the scenario in a TOML file (the first grid point for sweep
 * files), overriding its seed.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be valid.
 */
enum HllStatus hll_simulate_file(const char *path, uint64_t seed, struct HllSimResult **out);

/**
 * Number of recorded transactions.
 *
 * # Safety
 * `r` must be null or valid; null yields 0.
 */
size_t hll_sim_result_len(const struct HllSimResult *r);

/**
 * Number of blocks cut.
 *
 * # Safety
 * `r` must be null or valid; null yields 0.
 */
size_t hll_sim_result_block_count(const struct HllSimResult *r);

/**
 * Copies one latency column, in transaction order, into `out`.
 *
 * # Safety
 * `r` must be valid and `out` must hold `len` doubles.
 */
enum HllStatus hll_sim_result_latencies(const struct HllSimResult *r,
                                        enum HllLatency kind,
                                        double *out,
                                        size_t len);

/**
 * # Safety
 * `r` must be null or a handle from this library not yet freed.
 */
void hll_sim_result_free(struct HllSimResult *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HLL_H */
