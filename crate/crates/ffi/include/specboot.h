#ifndef SPECBOOT_H
#define SPECBOOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. `SB_STATUS_OK` is zero; everything else is a failure.
 */
typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_ARGUMENT = 2,
  SB_STATUS_DIMENSION = 3,
  SB_STATUS_INVALID_DATA = 4,
  SB_STATUS_EMPTY_COMPONENT = 5,
  SB_STATUS_NUMERICAL = 6,
  SB_STATUS_BOOTSTRAP_ABORTED = 7,
  SB_STATUS_IO = 8,
  SB_STATUS_PARSE = 9,
  /**
   * The requested quantity does not exist for this result (for example
   * out-of-bag memberships of a non-bootstrapped fit).
   */
  SB_STATUS_NOT_AVAILABLE = 10,
  SB_STATUS_BUFFER_TOO_SMALL = 11,
  SB_STATUS_PANIC = 12,
} SbStatus;

typedef enum SbAlgorithm {
  SB_ALGORITHM_EM = 0,
  SB_ALGORITHM_SPECTRAL_EM = 1,
  SB_ALGORITHM_BOOT_EM = 2,
  SB_ALGORITHM_SPECTRAL_BOOT_EM = 3,
  SB_ALGORITHM_BOOT_SPECTRAL = 4,
} SbAlgorithm;

typedef enum SbInit {
  SB_INIT_KMEANS = 0,
  SB_INIT_RANDOM = 1,
} SbInit;

/**
 * Opaque data matrix with optional labels and probe rows.
 */
typedef struct SbDataset SbDataset;

/**
 * Opaque fit result.
 */
typedef struct SbFitResult SbFitResult;

/**
 * Run settings. Fill with [`sb_run_config_default`] and adjust.
 */
typedef struct SbRunConfig {
  enum SbAlgorithm algorithm;
  size_t groups;
  double eps;
  double eps_b;
  double dw_alpha;
  size_t dw_window;
  /**
   * 0 selects the per-algorithm default.
   */
  size_t min_bootstrap;
  size_t max_bootstrap;
  uint64_t seed;
  enum SbInit init;
  bool center;
} SbRunConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a
 * successful call. The pointer stays valid until the next `sb_*` call on
 * the same thread.
 */
const char *sb_last_error_message(void);

/**
 * Fills `out` with the library defaults (spectral-boot-em, G = 2).
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum SbStatus sb_run_config_default(struct SbRunConfig *out);

/**
 * Copies an `nrows x ncols` row-major matrix into a new dataset.
 *
 * # Safety
 * `values` must point to `nrows * ncols` doubles; `out` must be valid for
 * writes.
 */
enum SbStatus sb_dataset_from_rows(const double *values,
                                   size_t nrows,
                                   size_t ncols,
                                   struct SbDataset **out);

/**
 * Simulated mirror data: two groups of `n_per_group` in `p` dimensions,
 * the second the negation of the first, plus a centre point (last row).
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SbStatus sb_dataset_simulate_mirror(size_t n_per_group,
                                         size_t p,
                                         uint64_t seed,
                                         struct SbDataset **out);

/**
 * Simulated cross-over data with `n_changers` group-switching rows.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SbStatus sb_dataset_simulate_cross_over(size_t n_per_group,
                                             size_t time_points,
                                             size_t n_changers,
                                             uint64_t seed,
                                             struct SbDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle; the out pointers must be valid.
 */
enum SbStatus sb_dataset_shape(const struct SbDataset *dataset, size_t *nrows, size_t *ncols);

/**
 * Copies the probe row indices of a simulated dataset. `len` receives the
 * count; pass `out = NULL` to query it.
 *
 * # Safety
 * `dataset` must be live; `out` must hold `capacity` entries if non-null.
 */
enum SbStatus sb_dataset_special_indices(const struct SbDataset *dataset,
                                         size_t *out,
                                         size_t capacity,
                                         size_t *len);

/**
 * Copies the ground-truth labels of a simulated dataset (`n` entries).
 * Datasets built from raw rows have none.
 *
 * # Safety
 * `dataset` must be live; `out` must hold `capacity` entries.
 */
enum SbStatus sb_dataset_labels(const struct SbDataset *dataset, size_t *out, size_t capacity);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void sb_dataset_free(struct SbDataset *dataset);

/**
 * Fits the configured estimator.
 *
 * # Safety
 * `dataset` and `config` must be valid; `out` must be valid for writes.
 */
enum SbStatus sb_fit(const struct SbDataset *dataset,
                     const struct SbRunConfig *config,
                     struct SbFitResult **out);

/**
 * # Safety
 * `result` must be live; `out` valid for writes.
 */
enum SbStatus sb_fit_result_log_likelihood(const struct SbFitResult *result, double *out);

/**
 * BIC in the larger-is-better convention, in the estimation space.
 *
 * # Safety
 * `result` must be live; `out` valid for writes.
 */
enum SbStatus sb_fit_result_bic(const struct SbFitResult *result, double *out);

/**
 * # Safety
 * `result` must be live; `out` valid for writes.
 */
enum SbStatus sb_fit_result_elapsed_seconds(const struct SbFitResult *result, double *out);

/**
 * # Safety
 * `result` must be live; `out` valid for writes.
 */
enum SbStatus sb_fit_result_converged(const struct SbFitResult *result, bool *out);

/**
 * Number of accepted bootstrap samples; `SB_STATUS_NOT_AVAILABLE` for
 * non-bootstrapped estimators.
 *
 * # Safety
 * `result` must be live; `out` valid for writes.
 */
enum SbStatus sb_fit_result_bootstrap_iterations(const struct SbFitResult *result, size_t *out);

/**
 * Shape of the membership matrices (observations x components).
 *
 * # Safety
 * `result` must be live; out pointers valid for writes.
 */
enum SbStatus sb_fit_result_membership_shape(const struct SbFitResult *result,
                                             size_t *nrows,
                                             size_t *ncols);

/**
 * Copies the full-data memberships, row-major.
 *
 * # Safety
 * `result` must be live; `out` must hold `capacity` doubles.
 */
enum SbStatus sb_fit_result_memberships(const struct SbFitResult *result,
                                        double *out,
                                        size_t capacity);

/**
 * Copies the out-of-bag memberships, row-major.
 *
 * # Safety
 * `result` must be live; `out` must hold `capacity` doubles.
 */
enum SbStatus sb_fit_result_oob_memberships(const struct SbFitResult *result,
                                            double *out,
                                            size_t capacity);

/**
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void sb_fit_result_free(struct SbFitResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECBOOT_H */
