#ifndef CCD_H
#define CCD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CcdStatus {
  CCD_STATUS_OK = 0,
  CCD_STATUS_NULL_POINTER = 1,
  CCD_STATUS_INVALID_ARGUMENT = 2,
  CCD_STATUS_CONFIG = 3,
  CCD_STATUS_INFEASIBLE = 4,
  CCD_STATUS_NOT_HURWITZ = 5,
  CCD_STATUS_NUMERICAL = 6,
  CCD_STATUS_OUT_OF_RANGE = 7,
  CCD_STATUS_PANIC = 8,
} CcdStatus;

/**
 * How a descent ended.
 */
typedef enum CcdTermination {
  CCD_TERMINATION_GRAD_TOLERANCE_MET = 0,
  CCD_TERMINATION_COST_CHANGE_TOLERANCE_MET = 1,
  CCD_TERMINATION_MAX_ITERS = 2,
  CCD_TERMINATION_LINE_SEARCH_STALLED = 3,
} CcdTermination;

/**
 * A configured co-design problem and its current design point.
 */
typedef struct CcdProblem CcdProblem;

/**
 * Outcome of [`ccd_problem_optimize`].
 */
typedef struct CcdResult CcdResult;

/**
 * Design variables in the order `a, b, k1, k2`.
 */
typedef struct CcdPoint {
  double a;
  double b;
  double k1;
  double k2;
} CcdPoint;

typedef struct CcdMargins {
  double kbar;
  double m1;
  double m2;
  double m3;
  double max_re_eig;
  /**
   * Nonzero when all margins are negative and the closed loop is Hurwitz.
   */
  int32_t feasible;
} CcdMargins;

typedef struct CcdPdeCost {
  double j_control;
  double j_total;
  double j_total_time_scaled;
} CcdPdeCost;

typedef struct CcdTraceRow {
  size_t iter;
  struct CcdPoint point;
  double jf;
  double grad_norm;
  double step;
  size_t backtracks;
} CcdTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ccd_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated
 * and always NUL-terminated when `len > 0`). Returns the length the full
 * message needs including the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t ccd_last_error(char *buf, size_t len);

/**
 * Creates a problem from a built-in scenario name such as `case1-hom`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum CcdStatus ccd_problem_from_preset(const char *name, struct CcdProblem **out);

/**
 * Creates a problem from a `key = value` configuration document.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum CcdStatus ccd_problem_from_config(const char *text, struct CcdProblem **out);

/**
 * Creates a problem for case 1, 2 or 3 with default settings on a grid of
 * `n` nodes, or on the calibrated grid when `n == 0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CcdStatus ccd_problem_new(uint32_t case_id,
                               bool homogeneous,
                               size_t n,
                               struct CcdProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from a `ccd_problem_*` constructor
 * that has not been freed.
 */
void ccd_problem_free(struct CcdProblem *problem);

/**
 * Number of grid nodes the problem uses for the Lyapunov cost.
 *
 * # Safety
 * `problem` must be a live handle; `n` must be writable.
 */
enum CcdStatus ccd_problem_grid_size(const struct CcdProblem *problem, size_t *n);

/**
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum CcdStatus ccd_problem_point(const struct CcdProblem *problem, struct CcdPoint *out);

/**
 * Replaces the design point; frozen variables are overwritten as well.
 *
 * # Safety
 * `problem` must be a live handle.
 */
enum CcdStatus ccd_problem_set_point(struct CcdProblem *problem, struct CcdPoint point);

/**
 * Stability margins and closed-loop spectral abscissa at the current point.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum CcdStatus ccd_problem_margins(const struct CcdProblem *problem, struct CcdMargins *out);

/**
 * Lyapunov cost `f_d + tr(P X0)` at the current point.
 *
 * # Safety
 * `problem` must be a live handle; `jf` must be writable.
 */
enum CcdStatus ccd_problem_cost(const struct CcdProblem *problem, double *jf);

/**
 * Gradient of the cost in the order `a, b, k1, k2`; frozen entries are 0.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum CcdStatus ccd_problem_gradient(const struct CcdProblem *problem, struct CcdPoint *out);

/**
 * Time-domain cost of the current point on the problem's simulation grid.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum CcdStatus ccd_problem_pde_cost(const struct CcdProblem *problem, struct CcdPdeCost *out);

/**
 * Runs the descent from the current point.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum CcdStatus ccd_problem_optimize(const struct CcdProblem *problem, struct CcdResult **out);

/**
 * # Safety
 * `result` must be null or a handle from [`ccd_problem_optimize`] that has
 * not been freed.
 */
void ccd_result_free(struct CcdResult *result);

/**
 * Final point and cost.
 *
 * # Safety
 * `result` must be a live handle; `point` and `jf` must be writable.
 */
enum CcdStatus ccd_result_optimum(const struct CcdResult *result,
                                  struct CcdPoint *point,
                                  double *jf);

/**
 * # Safety
 * `result` must be a live handle; `out` must be writable.
 */
enum CcdStatus ccd_result_termination(const struct CcdResult *result, enum CcdTermination *out);

/**
 * Number of trace rows, the starting point included.
 *
 * # Safety
 * `result` must be a live handle; `len` must be writable.
 */
enum CcdStatus ccd_result_trace_len(const struct CcdResult *result, size_t *len);

/**
 * # Safety
 * `result` must be a live handle; `out` must be writable.
 */
enum CcdStatus ccd_result_trace_row(const struct CcdResult *result,
                                    size_t index,
                                    struct CcdTraceRow *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CCD_H */
