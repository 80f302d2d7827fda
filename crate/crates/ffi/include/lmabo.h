#ifndef LMABO_H
#define LMABO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum LmaboStatus {
  LMABO_STATUS_OK = 0,
  LMABO_STATUS_NULL_POINTER = 1,
  LMABO_STATUS_INVALID_ARGUMENT = 2,
  LMABO_STATUS_NUMERICAL = 3,
  LMABO_STATUS_NOT_FOUND = 4,
  LMABO_STATUS_CONFIG = 5,
  LMABO_STATUS_EVALUATION = 6,
  LMABO_STATUS_TRANSPORT = 7,
  LMABO_STATUS_DATA = 8,
  LMABO_STATUS_IO = 9,
  /**
   * The output buffer is too small; the required size was written.
   */
  LMABO_STATUS_BUFFER_TOO_SMALL = 10,
  LMABO_STATUS_PANIC = 11,
  LMABO_STATUS_INTERNAL = 12,
} LmaboStatus;

/**
 * A Gaussian-process surrogate with fitted hyperparameters.
 */
typedef struct LmaboGp LmaboGp;

/**
 * A benchmark problem.
 */
typedef struct LmaboProblem LmaboProblem;

/**
 * A finished optimization run.
 */
typedef struct LmaboRecord LmaboRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf`. Writes an
 * empty string when the last call succeeded.
 *
 * # Safety
 * `buf` must point to `len` writable bytes; `needed` may be null.
 */
enum LmaboStatus lmabo_last_error(char *buf, size_t len, size_t *needed);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lmabo_version(void);

/**
 * Looks up a registry problem (`Name` or `Name-kD`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum LmaboStatus lmabo_problem_new(const char *name, struct LmaboProblem **out);

/**
 * # Safety
 * `problem` must come from `lmabo_problem_new` and not be used afterwards.
 */
void lmabo_problem_free(struct LmaboProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle; `dim` must be writable.
 */
enum LmaboStatus lmabo_problem_dim(const struct LmaboProblem *problem, size_t *dim);

/**
 * Box bounds; `lower` and `upper` hold `dim` values each.
 *
 * # Safety
 * `problem` must be a live handle; both outputs must hold `dim` doubles.
 */
enum LmaboStatus lmabo_problem_bounds(const struct LmaboProblem *problem,
                                      double *lower,
                                      double *upper,
                                      size_t dim);

/**
 * Noise-free objective value at `x`.
 *
 * # Safety
 * `problem` must be a live handle; `x` must hold `dim` doubles.
 */
enum LmaboStatus lmabo_problem_evaluate(const struct LmaboProblem *problem,
                                        const double *x,
                                        size_t dim,
                                        double *value);

/**
 * Known global minimum; `LMABO_STATUS_NOT_FOUND` when unknown.
 *
 * # Safety
 * `problem` must be a live handle; `value` must be writable.
 */
enum LmaboStatus lmabo_problem_optimum(const struct LmaboProblem *problem, double *value);

/**
 * Fits a GP to `n` points of dimension `dim` inside the box
 * `[lower, upper]`. `points` is row-major `n × dim`.
 *
 * # Safety
 * All arrays must hold the stated number of doubles; `out` must be writable.
 */
enum LmaboStatus lmabo_gp_fit(const double *points,
                              const double *values,
                              size_t n,
                              size_t dim,
                              const double *lower,
                              const double *upper,
                              uint64_t seed,
                              struct LmaboGp **out);

/**
 * # Safety
 * `gp` must come from `lmabo_gp_fit` and not be used afterwards.
 */
void lmabo_gp_free(struct LmaboGp *gp);

/**
 * Posterior mean and variance (original output units) at `m` query points.
 *
 * # Safety
 * `gp` must be a live handle; `x` holds `m × dim` doubles, `mean` and
 * `variance` `m` each.
 */
enum LmaboStatus lmabo_gp_predict(const struct LmaboGp *gp,
                                  const double *x,
                                  size_t m,
                                  size_t dim,
                                  double *mean,
                                  double *variance);

/**
 * Fitted lengthscales (unit-cube units), `dim` values.
 *
 * # Safety
 * `gp` must be a live handle; `out` must hold `dim` doubles.
 */
enum LmaboStatus lmabo_gp_lengthscales(const struct LmaboGp *gp, double *out, size_t dim);

/**
 * Runs one optimization without an LLM strategist. `budget` 0 picks the
 * default; `output_dir` may be null to keep the record in memory only.
 *
 * # Safety
 * String arguments must be NUL-terminated (or null where allowed); `out`
 * must be writable.
 */
enum LmaboStatus lmabo_run(const char *problem,
                           const char *strategist,
                           uint64_t seed,
                           size_t budget,
                           const char *output_dir,
                           struct LmaboRecord **out);

/**
 * # Safety
 * `record` must come from `lmabo_run` and not be used afterwards.
 */
void lmabo_record_free(struct LmaboRecord *record);

/**
 * Number of loop iterations recorded.
 *
 * # Safety
 * `record` must be a live handle; `len` must be writable.
 */
enum LmaboStatus lmabo_record_len(const struct LmaboRecord *record, size_t *len);

/**
 * Best value seen after each iteration; `out` holds `len` doubles.
 *
 * # Safety
 * `record` must be a live handle; `out` must hold `len` doubles.
 */
enum LmaboStatus lmabo_record_incumbents(const struct LmaboRecord *record, double *out, size_t len);

/**
 * Acquisition function chosen at `iteration` (0-based) as its short tag.
 *
 * # Safety
 * `record` must be a live handle; `buf` must hold `len` bytes.
 */
enum LmaboStatus lmabo_record_choice(const struct LmaboRecord *record,
                                     size_t iteration,
                                     char *buf,
                                     size_t len,
                                     size_t *needed);

/**
 * Friedman test on a row-major `n_problems × n_methods` rank matrix.
 *
 * # Safety
 * `ranks` must hold `n_problems × n_methods` doubles; outputs writable.
 */
enum LmaboStatus lmabo_friedman(const double *ranks,
                                size_t n_problems,
                                size_t n_methods,
                                double *statistic,
                                double *p_value);

/**
 * Holm step-down adjustment of `n` p-values, in input order.
 *
 * # Safety
 * `p_values` and `adjusted` must hold `n` doubles each.
 */
enum LmaboStatus lmabo_holm(const double *p_values, size_t n, double *adjusted);

/**
 * Parses a strategist reply into an acquisition tag. Invalid replies give
 * `UCB` with `*fallback_used = 1`.
 *
 * # Safety
 * `reply` must be NUL-terminated; `buf` must hold `len` bytes;
 * `fallback_used` and `needed` may be null.
 */
enum LmaboStatus lmabo_parse_decision(const char *reply,
                                      char *buf,
                                      size_t len,
                                      size_t *needed,
                                      int32_t *fallback_used);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LMABO_H */
