#ifndef PTSIZE_H
#define PTSIZE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PtsStatus {
  PTS_STATUS_OK = 0,
  PTS_STATUS_NULL_ARGUMENT = 1,
  PTS_STATUS_INVALID_UTF8 = 2,
  PTS_STATUS_INVALID_ARGUMENT = 3,
  PTS_STATUS_PARSE = 4,
  PTS_STATUS_IO = 5,
  PTS_STATUS_INFEASIBLE = 6,
  PTS_STATUS_FIT_FAILED = 7,
  PTS_STATUS_OUTSIDE_ENVELOPE = 8,
  PTS_STATUS_PANIC = 99,
} PtsStatus;

/**
 * Design problem assembled from a configuration and a fitted bundle.
 */
typedef struct PtsProblem PtsProblem;

/**
 * Fitted loss surrogate.
 */
typedef struct PtsSurrogate PtsSurrogate;

/**
 * A point in the design space.
 */
typedef struct PtsDesign {
  /**
   * Rated power [W].
   */
  double p_rated;
  /**
   * Relative length [-].
   */
  double lambda;
  /**
   * Fixed gear ratio [-].
   */
  double gamma_fgt;
} PtsDesign;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (always
 * NUL-terminated when `len > 0`) and returns the full message length
 * excluding the terminator; 0 when no error has been recorded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t pts_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pts_version(void);

/**
 * Loss [W] of the built-in motor oracle with default technology data.
 *
 * # Safety
 * `out_loss` must be null or valid for writes.
 */
enum PtsStatus pts_oracle_loss(double p_rated,
                               double lambda,
                               double omega,
                               double torque,
                               double *out_loss);

/**
 * Parses a surrogate from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum PtsStatus pts_surrogate_from_json(const char *json, struct PtsSurrogate **out);

/**
 * Loads the surrogate from the bundle written by `ptsize fit` in `out_dir`.
 *
 * # Safety
 * `out_dir` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum PtsStatus pts_surrogate_load(const char *out_dir, struct PtsSurrogate **out);

/**
 * Predicted loss [W] at motor speed `omega` [rad/s] and mechanical power
 * `p_m` [W].
 *
 * # Safety
 * `s` must be a live handle; `out_loss` must be valid for writes.
 */
enum PtsStatus pts_surrogate_predict_loss(const struct PtsSurrogate *s,
                                          double omega,
                                          double p_rated,
                                          double lambda,
                                          double p_m,
                                          double *out_loss);

/**
 * Releases a surrogate handle; null is ignored.
 *
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void pts_surrogate_free(struct PtsSurrogate *s);

/**
 * Builds the design problem from a TOML configuration (null for defaults)
 * and the bundle in `out_dir`.
 *
 * # Safety
 * `config_path` must be null or a NUL-terminated string; `out_dir` must be a
 * NUL-terminated string; `out` must be valid for writes.
 */
enum PtsStatus pts_problem_load(const char *config_path,
                                const char *out_dir,
                                struct PtsProblem **out);

/**
 * Battery energy `ΔE_b` [J] of a design; `out_feasible` receives 1 when
 * every constraint holds, else 0.
 *
 * # Safety
 * `p` must be a live handle; the out pointers must be valid for writes.
 */
enum PtsStatus pts_problem_objective(const struct PtsProblem *p,
                                     struct PtsDesign design,
                                     double *out_delta_e,
                                     int *out_feasible);

/**
 * Multi-start solve, cross-checked against the dense grid when
 * `crosscheck` is nonzero.
 *
 * # Safety
 * `p` must be a live handle; the out pointers must be valid for writes.
 */
enum PtsStatus pts_problem_solve(const struct PtsProblem *p,
                                 uint32_t starts,
                                 uint64_t seed,
                                 int crosscheck,
                                 struct PtsDesign *out_design,
                                 double *out_delta_e);

/**
 * Releases a problem handle; null is ignored.
 *
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void pts_problem_free(struct PtsProblem *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PTSIZE_H */
