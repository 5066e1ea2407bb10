#ifndef TREEFLOW_H
#define TREEFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_ARGUMENT = 2,
  TF_STATUS_PARSE_ERROR = 3,
  TF_STATUS_NON_CONVERGENCE = 4,
  TF_STATUS_PANIC = 5,
} TfStatus;

/**
 * A tree together with its kernel caches. Create with [`tf_tree_new`], release with [`tf_tree_free`].
 */
typedef struct TfTree TfTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the next failing call.
 */
const char *tf_last_error(void);

/**
 * Allocates a tree with branching number `q >= 2`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum TfStatus tf_tree_new(uint32_t q, struct TfTree **out);

/**
 * Releases a tree. NULL is ignored.
 *
 * # Safety
 * `tree` must come from [`tf_tree_new`] and not be used afterwards.
 */
void tf_tree_free(struct TfTree *tree);

/**
 * `e^{-t} I_j(t)`, the heat kernel on the integers.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum TfStatus tf_heat_kernel_z(double t, uint32_t j, double *out);

/**
 * Graph distance between two vertices.
 *
 * # Safety
 * `tree` must be a live handle, `x` and `y` NUL-terminated strings, `out` valid for writes.
 */
enum TfStatus tf_vertex_distance(const struct TfTree *tree,
                                 const char *x,
                                 const char *y,
                                 uint64_t *out);

/**
 * Heat kernel of the flow Laplacian with respect to the flow measure.
 *
 * # Safety
 * As for [`tf_vertex_distance`].
 */
enum TfStatus tf_flow_heat_kernel(const struct TfTree *tree,
                                  double t,
                                  const char *x,
                                  const char *y,
                                  double *out);

/**
 * Heat kernel of the combinatorial Laplacian at distance `d`.
 *
 * # Safety
 * `tree` must be a live handle, `out` valid for writes.
 */
enum TfStatus tf_tree_heat_kernel(const struct TfTree *tree, double t, uint32_t d, double *out);

/**
 * Poisson kernel by subordination, to relative tolerance `rel_tol`.
 *
 * # Safety
 * As for [`tf_vertex_distance`].
 */
enum TfStatus tf_poisson_kernel(const struct TfTree *tree,
                                double t,
                                const char *x,
                                const char *y,
                                double rel_tol,
                                double *out);

/**
 * Riesz transform kernel `R(x, y)`.
 *
 * # Safety
 * As for [`tf_vertex_distance`].
 */
enum TfStatus tf_riesz_kernel(const struct TfTree *tree, const char *x, const char *y, double *out);

/**
 * `sup_t H_t(x, y)`, or `sup_t (d/t) H_t(x, y)` when `weighted`, and the maximiser.
 *
 * # Safety
 * As for [`tf_vertex_distance`]; `argmax` may be NULL.
 */
enum TfStatus tf_heat_sup(const struct TfTree *tree,
                          const char *x,
                          const char *y,
                          bool weighted,
                          double *sup,
                          double *argmax);

/**
 * Heat kernel by truncated uniformization of order `order`, with its certified error bound.
 *
 * # Safety
 * As for [`tf_vertex_distance`]; both out-pointers must be valid for writes.
 */
enum TfStatus tf_uniformization_heat(const struct TfTree *tree,
                                     double t,
                                     const char *x,
                                     const char *y,
                                     uint64_t order,
                                     double *value,
                                     double *bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TREEFLOW_H */
