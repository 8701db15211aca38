#ifndef GASKET_QW_H
#define GASKET_QW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Largest generation accepted by `gqw_walk_new`.
 */
#define GQW_MAX_GENERATION 12

/*
 Result codes of every fallible call.
 */
typedef enum GqwStatus {
  GQW_STATUS_OK = 0,
  GQW_STATUS_NULL_POINTER = 1,
  GQW_STATUS_INVALID_ARGUMENT = 2,
  GQW_STATUS_UNKNOWN_VERTEX = 3,
  GQW_STATUS_CAP_EXCEEDED = 4,
  GQW_STATUS_BUFFER_TOO_SMALL = 5,
  GQW_STATUS_INTERNAL = 6,
} GqwStatus;

typedef enum GqwBoundary {
  GQW_BOUNDARY_PERIODIC = 0,
  GQW_BOUNDARY_REFLECTIVE = 1,
} GqwBoundary;

/*
 Opaque walk handle.
 */
typedef struct GqwWalk GqwWalk;

typedef struct GqwStdDev {
  uint64_t t;
  double sigma_x;
  double sigma_y;
  double sigma;
} GqwStdDev;

/*
 Fitted `sigma = prefactor * t^exponent`.
 */
typedef struct GqwPowerLaw {
  double prefactor;
  double exponent;
  double residual;
  size_t points;
} GqwPowerLaw;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Create a walk on the generation-`generation` gasket. The walker starts in
 the uniform coin state at the bottom-center vertex `(2^g, 0)`.

 # Safety
 `out` must be a valid pointer to writable storage for one handle pointer.
 */
enum GqwStatus gqw_walk_new(uint32_t generation, enum GqwBoundary boundary, struct GqwWalk **out);

/*
 Release a handle. Null is ignored.

 # Safety
 `walk` must be null or a handle from `gqw_walk_new` not yet freed.
 */
void gqw_walk_free(struct GqwWalk *walk);

/*
 Number of vertices, or 0 for a null handle.

 # Safety
 `walk` must be null or a live handle.
 */
size_t gqw_walk_vertex_count(const struct GqwWalk *walk);

/*
 Number of valid (vertex, direction) ports, or 0 for a null handle.

 # Safety
 `walk` must be null or a live handle.
 */
size_t gqw_walk_port_count(const struct GqwWalk *walk);

/*
 Steps taken since the last reset, or 0 for a null handle.

 # Safety
 `walk` must be null or a live handle.
 */
uint64_t gqw_walk_time(const struct GqwWalk *walk);

/*
 Vertex coordinates in index order as `x0, y0, x1, y1, ...`; `len` counts
 `int64_t` slots and must be at least twice the vertex count.

 # Safety
 `walk` must be a live handle and `xy` must point to `len` writable values.
 */
enum GqwStatus gqw_walk_vertices(const struct GqwWalk *walk, int64_t *xy, size_t len);

/*
 Restart from the uniform coin state at `(x, y)` with time 0.

 # Safety
 `walk` must be a live handle.
 */
enum GqwStatus gqw_walk_reset(struct GqwWalk *walk, int64_t x, int64_t y);

/*
 Apply `steps` coin-then-shift steps.

 # Safety
 `walk` must be a live handle.
 */
enum GqwStatus gqw_walk_step(struct GqwWalk *walk, uint64_t steps);

/*
 Per-vertex probabilities of the current state, in vertex index order.

 # Safety
 `walk` must be a live handle and `out` must point to `len` writable doubles.
 */
enum GqwStatus gqw_walk_probabilities(const struct GqwWalk *walk, double *out, size_t len);

/*
 Standard deviation of the current position distribution.

 # Safety
 `walk` must be a live handle and `out` a valid pointer.
 */
enum GqwStatus gqw_walk_stddev(const struct GqwWalk *walk, struct GqwStdDev *out);

/*
 Limiting distribution of the time-averaged walk started from the current
 state. Uses the spectral decomposition when the port count is at most
 `dense_cap`, otherwise the time average over `horizon` steps. `spectral`
 (optional) receives whether the spectral route was taken.

 # Safety
 `walk` must be a live handle, `out` must point to `len` writable doubles,
 and `spectral` must be null or valid.
 */
enum GqwStatus gqw_walk_limiting(const struct GqwWalk *walk,
                                 size_t dense_cap,
                                 uint64_t horizon,
                                 double *out,
                                 size_t len,
                                 bool *spectral);

/*
 Whether `(x, y)` lies on the generation-`generation` gasket.
 */
bool gqw_contains(uint32_t generation, int64_t x, int64_t y);

/*
 Least-squares fit of `y = a t^b` in log-log space over `t_min <= t <= t_max`.

 # Safety
 `t` and `y` must point to `n` readable doubles; `out` must be valid.
 */
enum GqwStatus gqw_fit_power_law(const double *t,
                                 const double *y,
                                 size_t n,
                                 double t_min,
                                 double t_max,
                                 struct GqwPowerLaw *out);

/*
 Static description of a status code.
 */
const char *gqw_status_str(enum GqwStatus status);

/*
 Copy the calling thread's last error message into `buf` (NUL-terminated,
 truncated to fit). Returns the buffer size needed for the full message,
 including the terminator. Passing a null `buf` only queries the size.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t gqw_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GASKET_QW_H */
