#ifndef RENEGE_H
#define RENEGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RenegeStatus {
  RENEGE_STATUS_OK = 0,
  RENEGE_STATUS_NULL_POINTER = 1,
  RENEGE_STATUS_INVALID_ARGUMENT = 2,
  RENEGE_STATUS_INVALID_SOURCE = 3,
  RENEGE_STATUS_CAPABILITY = 4,
  RENEGE_STATUS_DEPTH_EXHAUSTED = 5,
  RENEGE_STATUS_RENOVATION_NOT_FOUND = 6,
  RENEGE_STATUS_ORACLE_TRUNCATION = 7,
  RENEGE_STATUS_PANIC = 8,
} RenegeStatus;

typedef enum RenegeAlpha {
  RENEGE_ALPHA_SIGMA_PLUS_D = 0,
  RENEGE_ALPHA_SIGMA_MIN_D = 1,
  RENEGE_ALPHA_D_ONLY = 2,
} RenegeAlpha;

typedef enum RenegeModel {
  RENEGE_MODEL_BEGIN = 0,
  RENEGE_MODEL_END = 1,
} RenegeModel;

/**
 * Opaque mark source.
 */
typedef struct RenegeSource RenegeSource;

typedef struct RenegeMark {
  double xi;
  double sigma;
  double dpat;
} RenegeMark;

typedef struct RenegeSampleOptions {
  /**
   * Nonzero selects the exact (renovation-based) method.
   */
  uint8_t exact;
  size_t max_epochs;
  size_t max_depth;
  size_t warmup;
} RenegeSampleOptions;

typedef struct RenegeEstimate {
  double point;
  double lower;
  double upper;
  double std_error;
  size_t n;
} RenegeEstimate;

typedef struct RenegeLoss {
  struct RenegeEstimate pi_hat;
  /**
   * Only meaningful for the end model; zeroed otherwise.
   */
  struct RenegeEstimate pi_hat_never_served;
  struct RenegeEstimate lower_bound;
  struct RenegeEstimate upper_bound;
  uint8_t bracket_ok;
} RenegeLoss;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *renege_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *renege_version(void);

/**
 * Builds a source from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum RenegeStatus renege_source_from_json(const char *json, struct RenegeSource **out);

/**
 * Releases a source. Null is ignored.
 *
 * # Safety
 * `src` must come from this library and not be used afterwards.
 */
void renege_source_free(struct RenegeSource *src);

/**
 * New source whose index 0 is index `k` of `src`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RenegeStatus renege_source_shift(const struct RenegeSource *src,
                                      int64_t k,
                                      struct RenegeSource **out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum RenegeStatus renege_mark_at(const struct RenegeSource *src,
                                 int64_t index,
                                 struct RenegeMark *out);

/**
 * One step of the begin-of-service workload recursion.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RenegeStatus renege_fifo_step(double w, const struct RenegeMark *mark, double *out);

/**
 * One step of the end-of-service workload recursion.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RenegeStatus renege_end_step(double s, const struct RenegeMark *mark, double *out);

/**
 * Backward supremum of the generic recursion at `epoch`. `exact` receives 1
 * when a zero certificate was found.
 *
 * # Safety
 * Pointers must be valid; `exact` may be null.
 */
enum RenegeStatus renege_backward_supremum(const struct RenegeSource *src,
                                           enum RenegeAlpha alpha,
                                           int64_t epoch,
                                           size_t max_depth,
                                           uint8_t exact_mode,
                                           double *out,
                                           uint8_t *exact);

/**
 * One stationary workload draw at index 0 of `src`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RenegeStatus renege_sample_stationary(const struct RenegeSource *src,
                                           enum RenegeModel which,
                                           const struct RenegeSampleOptions *opts,
                                           double *out);

/**
 * Loss probability estimate with its bounds.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RenegeStatus renege_loss(const struct RenegeSource *src,
                              enum RenegeModel which,
                              size_t samples,
                              const struct RenegeSampleOptions *opts,
                              struct RenegeLoss *out);

/**
 * Abandonment probability of the single-server Markovian queue with
 * exponential patience. `blocking` may be null.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RenegeStatus renege_birth_death(double lambda,
                                     double mu,
                                     double gamma,
                                     double *abandonment,
                                     double *blocking);

/**
 * Two-sample Kolmogorov-Smirnov statistic.
 *
 * # Safety
 * `a` and `b` must point to `na` and `nb` doubles.
 */
enum RenegeStatus renege_ks_two_sample(const double *a,
                                       size_t na,
                                       const double *b,
                                       size_t nb,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RENEGE_H */
