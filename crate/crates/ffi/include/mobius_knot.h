#ifndef MOBIUS_KNOT_H
#define MOBIUS_KNOT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  MK_STATUS_OK = 0,
  MK_STATUS_NULL_POINTER = 1,
  MK_STATUS_INVALID_ARGUMENT = 2,
  MK_STATUS_PARSE = 3,
  MK_STATUS_IO = 4,
  MK_STATUS_NUMERIC = 5,
  MK_STATUS_FLOW_ABORT = 6,
  MK_STATUS_BUFFER_TOO_SMALL = 7,
  MK_STATUS_PANIC = 8,
} MkStatus;

typedef enum {
  MK_STOP_REASON_CONVERGED = 0,
  MK_STOP_REASON_MAX_STEPS = 1,
  MK_STOP_REASON_STALLED = 2,
  MK_STOP_REASON_ABORTED = 3,
  MK_STOP_REASON_INTERRUPTED = 4,
} MkStopReason;

/**
 * Values for the `formula` argument of [`mk_energy`].
 */
typedef enum {
  MK_FORMULA_RENORMALIZED = 0,
  MK_FORMULA_COSINE = 1,
  MK_FORMULA_SPHERE = 2,
  MK_FORMULA_OPEN = 3,
} MkFormula;

/**
 * Values for [`MkFlowConfig::metric`].
 */
typedef enum {
  MK_METRIC_L2 = 0,
  MK_METRIC_SOBOLEV = 1,
} MkMetric;

/**
 * Opaque polygonal curve.
 */
typedef struct MkCurve MkCurve;

/**
 * Opaque result of a flow run.
 */
typedef struct MkFlowTrace MkFlowTrace;

typedef struct {
  double abs_density;
  double theta;
  double re_density;
  double im_density;
} MkCrossRatio;

typedef struct {
  double alpha;
  double step_init;
  size_t max_steps;
  double grad_tol;
  size_t resample_every;
  double min_self_dist_factor;
  /**
   * One of the [`MkMetric`] values.
   */
  uint32_t metric;
} MkFlowConfig;

typedef struct {
  size_t step;
  double energy;
  double step_size;
  double grad_norm;
  double min_self_dist;
  bool resampled;
} MkStepRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mk_version(void);

/**
 * Message for the last failing call on this thread, or "" after a
 * success. Valid until the next call on the same thread.
 */
const char *mk_last_error_message(void);

/**
 * Builds a curve from `n` vertices stored as `3n` doubles (x, y, z).
 *
 * # Safety
 * `coords` must point to `3 * n` readable doubles; `out` must be writable.
 */
MkStatus mk_curve_new(const double *coords, size_t n, bool closed, MkCurve **out);

/**
 * Reads a knot file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
MkStatus mk_curve_read_file(const char *path, MkCurve **out);

/**
 * Builds a curve from a generator spec such as `gen:trefoil:n=256`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
MkStatus mk_curve_generate(const char *spec, MkCurve **out);

/**
 * Releases a curve. Null is ignored.
 *
 * # Safety
 * `c` must come from this library and not be used afterwards.
 */
void mk_curve_free(MkCurve *c);

/**
 * # Safety
 * `c` must be a live curve handle; `out` must be writable.
 */
MkStatus mk_curve_len(const MkCurve *c, size_t *out);

/**
 * # Safety
 * `c` must be a live curve handle; `out` must be writable.
 */
MkStatus mk_curve_is_closed(const MkCurve *c, bool *out);

/**
 * Copies the vertices as `3n` doubles into `out`.
 *
 * # Safety
 * `out` must have room for `cap` doubles.
 */
MkStatus mk_curve_vertices(const MkCurve *c, double *out, size_t cap);

/**
 * # Safety
 * `c` must be a live curve handle; `out` must be writable.
 */
MkStatus mk_curve_total_length(const MkCurve *c, double *out);

/**
 * New curve with `n` vertices at equal chord spacing.
 *
 * # Safety
 * `c` must be a live curve handle; `out` must be writable.
 */
MkStatus mk_curve_resample(const MkCurve *c, size_t n, MkCurve **out);

/**
 * Energy of a curve; `formula` is one of the [`MkFormula`] values.
 * `Cosine` and `Open` need `alpha = 2`; `Sphere`
 * lifts the curve to the unit 3-sphere first.
 *
 * # Safety
 * `c` must be a live curve handle; `out` must be writable.
 */
MkStatus mk_energy(const MkCurve *c, double alpha, uint32_t formula, double *out);

/**
 * Cross term between two disjoint closed curves.
 *
 * # Safety
 * `a`, `b` must be live curve handles; `out` must be writable.
 */
MkStatus mk_cross_energy(const MkCurve *a, const MkCurve *b, double *out);

/**
 * # Safety
 * `c` must be a live curve handle; `out` must be writable.
 */
MkStatus mk_conformal_angle(const MkCurve *c, size_t i, size_t j, double *out);

/**
 * # Safety
 * `c` must be a live curve handle; `out` must be writable.
 */
MkStatus mk_cross_ratio_sample(const MkCurve *c, size_t i, size_t j, MkCrossRatio *out);

/**
 * Image of a curve under inversion in the sphere with centre
 * (cx, cy, cz) and radius r.
 *
 * # Safety
 * `c` must be a live curve handle; `out` must be writable.
 */
MkStatus mk_invert_curve(const MkCurve *c,
                         double cx,
                         double cy,
                         double cz,
                         double r,
                         MkCurve **out);

/**
 * dE/dv for every vertex, `3n` doubles.
 *
 * # Safety
 * `out` must have room for `cap` doubles.
 */
MkStatus mk_gradient(const MkCurve *c, double alpha, double *out, size_t cap);

/**
 * Default flow settings.
 */
MkFlowConfig mk_flow_config_default(void);

/**
 * Runs the flow. On an abort the trace is still handed out and the call
 * returns `MK_STATUS_FLOW_ABORT`.
 *
 * # Safety
 * `c` must be a live curve handle, `cfg` readable, `out` writable.
 */
MkStatus mk_relax(const MkCurve *c, const MkFlowConfig *cfg, MkFlowTrace **out);

/**
 * Releases a trace. Null is ignored.
 *
 * # Safety
 * `t` must come from [`mk_relax`] and not be used afterwards.
 */
void mk_trace_free(MkFlowTrace *t);

/**
 * Number of step records, including the initial state.
 *
 * # Safety
 * `t` must be a live trace; `out` writable.
 */
MkStatus mk_trace_len(const MkFlowTrace *t, size_t *out);

/**
 * # Safety
 * `t` must be a live trace; `out` writable.
 */
MkStatus mk_trace_record(const MkFlowTrace *t, size_t k, MkStepRecord *out);

/**
 * # Safety
 * `t` must be a live trace; `out` writable.
 */
MkStatus mk_trace_stop(const MkFlowTrace *t, MkStopReason *out);

/**
 * Copy of the final curve of a trace, as a new handle.
 *
 * # Safety
 * `t` must be a live trace; `out` writable.
 */
MkStatus mk_trace_curve(const MkFlowTrace *t, MkCurve **out);

/**
 * Minkowski inner product of two `dim`-vectors, time coordinate first.
 *
 * # Safety
 * `u`, `v` must hold `dim` doubles; `out` writable.
 */
MkStatus mk_mink_inner(const double *u, const double *v, size_t dim, double *out);

/**
 * Number of coordinates of a `k`-blade in dimension `dim`.
 */
size_t mk_blade_len(size_t dim, size_t k);

/**
 * Wedge of `k` vectors of dimension `dim`, given row-major, into
 * `mk_blade_len(dim, k)` coordinates in lexicographic multi-index order.
 *
 * # Safety
 * `vectors` must hold `k * dim` doubles; `out` room for `cap` doubles.
 */
MkStatus mk_wedge(const double *vectors, size_t k, size_t dim, double *out, size_t cap);

/**
 * Matrix of (q+2)-minors of a `dim`×`dim` row-major matrix, written
 * row-major; it is `m`×`m` with `m = mk_blade_len(dim, q + 2)`.
 *
 * # Safety
 * `a` must hold `dim * dim` doubles; `out` room for `cap` doubles.
 */
MkStatus mk_psi_matrix(const double *a, size_t dim, size_t q, double *out, size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOBIUS_KNOT_H */
