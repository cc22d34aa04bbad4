#ifndef BEND_H
#define BEND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BendStatus {
  BEND_STATUS_OK = 0,
  BEND_STATUS_NULL_POINTER = 1,
  BEND_STATUS_INVALID_UTF8 = 2,
  BEND_STATUS_SHAPE = 3,
  BEND_STATUS_INPUT = 4,
  BEND_STATUS_CONFIG = 5,
  BEND_STATUS_FORMAT = 6,
  BEND_STATUS_CORRUPT = 7,
  BEND_STATUS_VERSION = 8,
  BEND_STATUS_IO = 9,
  BEND_STATUS_NUMERIC = 10,
  BEND_STATUS_UNDEFINED_BREAK_EVEN = 11,
  BEND_STATUS_MISSING_TARGET = 12,
  BEND_STATUS_PANIC = 13,
} BendStatus;

/**
 * Prediction matrix plus an optional ground-truth row.
 */
typedef struct BendPredictions BendPredictions;

typedef struct BendTrials {
  double mean;
  double std;
} BendTrials;

typedef struct BendBaseline {
  double max;
  double mean;
  double median;
  double potential;
} BendBaseline;

/**
 * `d_o` is NaN when no second matrix was given.
 */
typedef struct BendDiversity {
  double d_i_raw;
  double d_i_rate;
  double d_o;
} BendDiversity;

typedef struct BendIou {
  double allway;
  double pairwise_mean;
} BendIou;

typedef struct BendCostInputs {
  uint64_t k_pre;
  uint64_t k;
  double t_orge;
  double t_ate;
  double t_ddpm;
  double t_sgen;
} BendCostInputs;

typedef struct BendCostEstimate {
  double t_diff;
  double t_trad;
  double breakeven_m;
} BendCostEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *bend_last_error(void);

/**
 * Builds a handle from `m * n` row-major labels.
 *
 * # Safety
 * `preds` must point to `m * n` readable values and `out_handle` must be
 * writable.
 */
enum BendStatus bend_predictions_new(size_t m,
                                     size_t n,
                                     const uint32_t *preds,
                                     struct BendPredictions **out_handle);

/**
 * Reads a predictions CSV. A `target` row, if present, becomes the target.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_handle` writable.
 */
enum BendStatus bend_predictions_load(const char *path, struct BendPredictions **out_handle);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `handle` must come from this library and not be used afterwards.
 */
void bend_predictions_free(struct BendPredictions *handle);

/**
 * # Safety
 * `handle` must be live; `m` and `n` writable.
 */
enum BendStatus bend_predictions_shape(const struct BendPredictions *handle, size_t *m, size_t *n);

/**
 * Replaces the target row; `len` must equal the sample count.
 *
 * # Safety
 * `handle` must be live and `target` must hold `len` values.
 */
enum BendStatus bend_predictions_set_target(struct BendPredictions *handle,
                                            const uint32_t *target,
                                            size_t len);

/**
 * Majority vote. `inferred` may be null; otherwise it receives `n` labels.
 *
 * # Safety
 * `handle` must be live, `accuracy` writable, and `inferred` null or
 * writable for `n` values.
 */
enum BendStatus bend_sbend(const struct BendPredictions *handle,
                           uint32_t *inferred,
                           double *accuracy);

/**
 * One stochastic vote drawn with `seed`.
 *
 * # Safety
 * Same contract as [`bend_sbend`].
 */
enum BendStatus bend_abend(const struct BendPredictions *handle,
                           uint64_t seed,
                           uint32_t *inferred,
                           double *accuracy);

/**
 * Mean and population std of `trials` stochastic votes seeded
 * `seed, seed + 1, ...`.
 *
 * # Safety
 * `handle` must be live and `result` writable.
 */
enum BendStatus bend_abend_trials(const struct BendPredictions *handle,
                                  uint64_t seed,
                                  size_t trials,
                                  struct BendTrials *result);

/**
 * # Safety
 * `handle` must be live and `result` writable.
 */
enum BendStatus bend_baseline(const struct BendPredictions *handle, struct BendBaseline *result);

/**
 * Within-set diversity of `handle`, and between-set diversity against
 * `other` when it is not null.
 *
 * # Safety
 * `handle` must be live, `other` null or live, `result` writable.
 */
enum BendStatus bend_diversity(const struct BendPredictions *handle,
                               const struct BendPredictions *other,
                               struct BendDiversity *result);

/**
 * Overlap of the classifiers' misclassified-sample sets.
 *
 * # Safety
 * `handle` must be live and `result` writable.
 */
enum BendStatus bend_wrong_set_iou(const struct BendPredictions *handle, struct BendIou *result);

/**
 * Training-time estimates for `m` classifiers and the break-even size.
 *
 * # Safety
 * `inputs` must be readable and `result` writable.
 */
enum BendStatus bend_cost_model(const struct BendCostInputs *inputs,
                                uint64_t m,
                                struct BendCostEstimate *result);

/**
 * Reference measurements used by the `cost` command when no inputs are given.
 */
struct BendCostInputs bend_cost_reference(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BEND_H */
