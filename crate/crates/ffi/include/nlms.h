/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef NLMS_H
#define NLMS_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes shared by every entry point.
 */
typedef enum NlmsStatus {
  NLMS_STATUS_OK = 0,
  NLMS_STATUS_NULL_POINTER = 1,
  NLMS_STATUS_INVALID_INPUT = 2,
  NLMS_STATUS_CONFIG = 3,
  NLMS_STATUS_ORDERING = 4,
  NLMS_STATUS_NOT_CONVERGED = 5,
  NLMS_STATUS_ORACLE_REFUSAL = 6,
  NLMS_STATUS_NUMERICAL = 7,
  NLMS_STATUS_IO = 8,
  NLMS_STATUS_BUFFER_TOO_SMALL = 9,
  NLMS_STATUS_PANIC = 10,
} NlmsStatus;

/**
 * Sampled graph function on a cell-centered grid.
 */
typedef struct NlmsGraph NlmsGraph;

/**
 * Outcome of a solve.
 */
typedef struct NlmsReport NlmsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message of the last failure on this thread, NUL-terminated.
 * `needed` receives the buffer size required, terminator included.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes or be null with `cap == 0`.
 */
enum NlmsStatus nlms_last_error(char *buf, size_t cap, size_t *needed);

/**
 * Creates a graph on `[-radius, radius]^dim` from `len` cell values in
 * row-major order. Outside the box the graph equals `exterior_value`.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum NlmsStatus nlms_graph_new(size_t dim,
                               double radius,
                               double spacing,
                               const double *values,
                               size_t len,
                               double exterior_value,
                               struct NlmsGraph **out);

/**
 * # Safety
 * `g` must come from this library and not be used afterwards; null is ignored.
 */
void nlms_graph_free(struct NlmsGraph *g);

/**
 * # Safety
 * `g` must be a live graph handle and `len` writable.
 */
enum NlmsStatus nlms_graph_len(const struct NlmsGraph *g, size_t *len);

/**
 * Copies the cell values into `buf`, which must hold `nlms_graph_len` doubles.
 *
 * # Safety
 * `g` must be a live graph handle and `buf` must point to `cap` writable doubles.
 */
enum NlmsStatus nlms_graph_values(const struct NlmsGraph *g, double *buf, size_t cap);

/**
 * Fractional mean curvature of the subgraph of `g` at every cell, order `s`.
 *
 * # Safety
 * `g` must be a live graph handle and `buf` must point to `cap` writable doubles.
 */
enum NlmsStatus nlms_graph_curvature(const struct NlmsGraph *g, double s, double *buf, size_t cap);

/**
 * Minimizes the nonlocal graph energy plus `int f u` over `u >= phi`. The
 * exterior datum of `u` is that of `phi`. `f` may be null for zero forcing.
 * `exact` selects the graph s-perimeter instead of the quadratic model;
 * `max_iters == 0` and `tol_kkt <= 0` keep the defaults.
 *
 * # Safety
 * Handles must be live or null where allowed; `out` must be writable.
 */
enum NlmsStatus nlms_solve_obstacle(const struct NlmsGraph *phi,
                                    const struct NlmsGraph *f,
                                    double s,
                                    bool exact,
                                    size_t max_iters,
                                    double tol_kkt,
                                    struct NlmsReport **out);

/**
 * Solves the two-membranes problem with forcings `f` (nonlocal membrane)
 * and `g` (classical membrane); the exterior data of `u` and `v` are those
 * of `f` and `g`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum NlmsStatus nlms_solve_two_membranes(const struct NlmsGraph *f,
                                         const struct NlmsGraph *g,
                                         double s,
                                         bool exact,
                                         size_t max_iters,
                                         double tol_kkt,
                                         struct NlmsReport **out);

/**
 * # Safety
 * `r` must come from this library and not be used afterwards; null is ignored.
 */
void nlms_report_free(struct NlmsReport *r);

/**
 * Convergence flag, iteration count and final energy of a solve.
 *
 * # Safety
 * `r` must be a live report; each out pointer may be null to skip it.
 */
enum NlmsStatus nlms_report_summary(const struct NlmsReport *r,
                                    bool *converged,
                                    size_t *iterations,
                                    double *energy);

/**
 * Returns a new handle to the solution graph: `u` when `which == 0`, `v`
 * (two-membranes only) when `which == 1`.
 *
 * # Safety
 * `r` must be a live report; `out` must be writable.
 */
enum NlmsStatus nlms_report_graph(const struct NlmsReport *r,
                                  uint32_t which,
                                  struct NlmsGraph **out);

/**
 * Number of contact cells of a graph solve.
 *
 * # Safety
 * `r` must be a live report and `count` writable.
 */
enum NlmsStatus nlms_report_contact_count(const struct NlmsReport *r, size_t *count);

/**
 * Runs an experiment config (TOML or JSON) like `nlms run`, writing the
 * artifacts below `output_dir` (the config's own directory setting when
 * null). Non-convergence and failed analyses give `NotConverged`.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `output_dir` may be null.
 */
enum NlmsStatus nlms_run_config(const char *config_path, const char *output_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLMS_H */
