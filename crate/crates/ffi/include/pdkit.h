#ifndef PDKIT_H
#define PDKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum PdStatus {
  PD_STATUS_OK = 0,
  PD_STATUS_NULL_POINTER = 1,
  PD_STATUS_DOMAIN = 2,
  PD_STATUS_CONSISTENCY = 3,
  PD_STATUS_SIZE = 4,
  PD_STATUS_NUMERIC = 5,
  PD_STATUS_UNSUPPORTED = 6,
  PD_STATUS_USAGE = 7,
  PD_STATUS_PARSE = 8,
  PD_STATUS_IO = 9,
  PD_STATUS_OUT_OF_RANGE = 10,
  PD_STATUS_BUFFER_TOO_SMALL = 11,
  PD_STATUS_PANIC = 12,
} PdStatus;

/**
 * Ranked mass partition with residual.
 */
typedef struct PdMassPartition PdMassPartition;

/**
 * Independent random stream.
 */
typedef struct PdRng PdRng;

/**
 * Recursive tree on vertices `0..=n`.
 */
typedef struct PdTree PdTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. Valid until the next call
 * that fails on the same thread.
 */
const char *pd_last_error(void);

/**
 * Static name of a status code.
 */
const char *pd_status_name(enum PdStatus status);

/**
 * Stream `stream` of the master seed `seed`. Never returns NULL.
 */
struct PdRng *pd_rng_new(uint64_t seed, uint64_t stream);

/**
 * # Safety
 * `rng` is NULL or a handle from [`pd_rng_new`] not yet freed.
 */
void pd_rng_free(struct PdRng *rng);

/**
 * Uniform draw in `[0, 1)`.
 *
 * # Safety
 * `rng` is a live handle and `out` points to writable storage.
 */
enum PdStatus pd_rng_uniform(struct PdRng *rng, double *out);

/**
 * Validated partition from `len` nonincreasing positive atoms and a residual.
 *
 * # Safety
 * `atoms` points to `len` readable doubles (may be NULL when `len = 0`); `out` is writable.
 */
enum PdStatus pd_partition_new(const double *atoms,
                               size_t len,
                               double residual,
                               struct PdMassPartition **out);

/**
 * # Safety
 * `x` is NULL or a partition handle not yet freed.
 */
void pd_partition_free(struct PdMassPartition *x);

/**
 * Number of stored atoms; 0 for NULL.
 *
 * # Safety
 * `x` is NULL or a live handle.
 */
size_t pd_partition_len(const struct PdMassPartition *x);

/**
 * Atom `i` (zero-based, largest first).
 *
 * # Safety
 * `x` is a live handle and `out` is writable.
 */
enum PdStatus pd_partition_atom(const struct PdMassPartition *x, size_t i, double *out);

/**
 * Residual mass `1 - sum(atoms)`.
 *
 * # Safety
 * `x` is a live handle and `out` is writable.
 */
enum PdStatus pd_partition_residual(const struct PdMassPartition *x, double *out);

/**
 * Copies all atoms into `buf`; `cap` must be at least [`pd_partition_len`].
 *
 * # Safety
 * `x` is a live handle and `buf` points to `cap` writable doubles.
 */
enum PdStatus pd_partition_copy_atoms(const struct PdMassPartition *x, double *buf, size_t cap);

/**
 * `PD(alpha, theta)` by stick-breaking, truncated at residual `eps` or `max_atoms` atoms.
 *
 * # Safety
 * `rng` is a live handle and `out` is writable.
 */
enum PdStatus pd_sample_pd(double alpha,
                           double theta,
                           double eps,
                           size_t max_atoms,
                           struct PdRng *rng,
                           struct PdMassPartition **out);

/**
 * `PD(alpha, theta)` as normalized subordinator jumps; requires `theta > 0`. The total mass
 * before normalization goes to `total` unless it is NULL.
 *
 * # Safety
 * `rng` is a live handle, `out` is writable and `total` is NULL or writable.
 */
enum PdStatus pd_sample_subordinator(double alpha,
                                     double theta,
                                     double eps,
                                     size_t max_atoms,
                                     struct PdRng *rng,
                                     struct PdMassPartition **out,
                                     double *total);

/**
 * One `Frag_alpha` step applied to `x`.
 *
 * # Safety
 * `x` and `rng` are live handles and `out` is writable.
 */
enum PdStatus pd_frag(double alpha,
                      const struct PdMassPartition *x,
                      double eps,
                      size_t max_atoms,
                      struct PdRng *rng,
                      struct PdMassPartition **out);

/**
 * One `Coag_{alpha,theta}` step applied to `x`.
 *
 * # Safety
 * `x` and `rng` are live handles and `out` is writable.
 */
enum PdStatus pd_coag(double alpha,
                      double theta,
                      const struct PdMassPartition *x,
                      struct PdRng *rng,
                      struct PdMassPartition **out);

/**
 * Chinese restaurant partition of `{1..n}`: `labels[k]` is the zero-based block of label
 * `k + 1`, blocks numbered by least element. The block count goes to `blocks` unless NULL.
 *
 * # Safety
 * `rng` is a live handle, `labels` points to `n` writable `size_t`, `blocks` is NULL or writable.
 */
enum PdStatus pd_crp(double alpha,
                     double theta,
                     size_t n,
                     struct PdRng *rng,
                     size_t *labels,
                     size_t *blocks);

/**
 * Colour partition of the first `n` individuals of the branching model, laid out as in
 * [`pd_crp`].
 *
 * # Safety
 * As for [`pd_crp`].
 */
enum PdStatus pd_branching(double alpha,
                           double theta,
                           size_t n,
                           struct PdRng *rng,
                           size_t *labels,
                           size_t *blocks);

/**
 * `(alpha, theta)`-recursive tree on vertices `0..=n`.
 *
 * # Safety
 * `rng` is a live handle and `out` is writable.
 */
enum PdStatus pd_tree_grow(double alpha,
                           double theta,
                           size_t n,
                           struct PdRng *rng,
                           struct PdTree **out);

/**
 * # Safety
 * `t` is NULL or a tree handle not yet freed.
 */
void pd_tree_free(struct PdTree *t);

/**
 * Number of non-root vertices; 0 for NULL.
 *
 * # Safety
 * `t` is NULL or a live handle.
 */
size_t pd_tree_n(const struct PdTree *t);

/**
 * Parent of vertex `v` in `1..=n`.
 *
 * # Safety
 * `t` is a live handle and `out` is writable.
 */
enum PdStatus pd_tree_parent(const struct PdTree *t, size_t v, size_t *out);

/**
 * Components after deleting vertices `0..=depth`: `labels[k]` is the zero-based block of
 * vertex `depth + 1 + k`. Needs `depth < n` and room for `n - depth` labels.
 *
 * # Safety
 * `t` is a live handle, `labels` points to `len` writable `size_t`, `blocks` is NULL or writable.
 */
enum PdStatus pd_tree_strip(const struct PdTree *t,
                            size_t depth,
                            size_t *labels,
                            size_t len,
                            size_t *blocks);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDKIT_H */
