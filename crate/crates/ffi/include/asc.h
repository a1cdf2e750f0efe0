#ifndef ASC_H
#define ASC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AscStatus {
  ASC_STATUS_OK = 0,
  /**
   * Bad data: shapes, values, constraint indices.
   */
  ASC_STATUS_INPUT = 1,
  /**
   * Eigensolver or degenerate geometry.
   */
  ASC_STATUS_NUMERICAL = 2,
  /**
   * Invalid setting, or no way to pick the fusion weight.
   */
  ASC_STATUS_CONFIG = 3,
  ASC_STATUS_NULL_POINTER = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  ASC_STATUS_PANIC = 5,
} AscStatus;

typedef enum AscMethod {
  ASC_METHOD_KMEANS = 0,
  ASC_METHOD_KMEDIANS = 1,
  ASC_METHOD_KMEDOIDS = 2,
} AscMethod;

typedef enum AscLaplacian {
  ASC_LAPLACIAN_UNNORMALIZED = 0,
  ASC_LAPLACIAN_SYMMETRIC = 1,
  ASC_LAPLACIAN_RANDOM_WALK = 2,
} AscLaplacian;

/**
 * Pipeline settings. Starts from the library defaults.
 */
typedef struct AscConfigHandle AscConfigHandle;

/**
 * Outcome of a run.
 */
typedef struct AscResultHandle AscResultHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *asc_last_error(void);

const char *asc_version(void);

struct AscConfigHandle *asc_config_new(void);

/**
 * # Safety
 * `cfg` is null or a handle from [`asc_config_new`] not yet freed.
 */
void asc_config_free(struct AscConfigHandle *cfg);

/**
 * Fixed fusion weight in [0, 1]; NaN returns to searching the grid with the
 * constraints passed to [`asc_run`].
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AscStatus asc_config_set_lambda(struct AscConfigHandle *cfg, double lambda);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AscStatus asc_config_set_lambda_step(struct AscConfigHandle *cfg, double step);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AscStatus asc_config_set_seed(struct AscConfigHandle *cfg, uint64_t seed);

/**
 * Cluster at exactly `k`; 0 chooses among eigengap candidates.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AscStatus asc_config_set_k(struct AscConfigHandle *cfg, size_t k);

/**
 * `method` is an [`AscMethod`] value.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AscStatus asc_config_set_method(struct AscConfigHandle *cfg, uint32_t method);

/**
 * `kind` is an [`AscLaplacian`] value.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AscStatus asc_config_set_laplacian(struct AscConfigHandle *cfg, uint32_t kind);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AscStatus asc_config_set_restarts(struct AscConfigHandle *cfg, size_t restarts);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AscStatus asc_config_set_eigengap_window(struct AscConfigHandle *cfg, size_t window);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AscStatus asc_config_set_rescale_numeric(struct AscConfigHandle *cfg, bool on);

/**
 * Check constraint triples against the raw numeric similarity on the
 * cannot-link side.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AscStatus asc_config_set_literal_lambda_rhs(struct AscConfigHandle *cfg, bool on);

/**
 * Pick k by the per-cluster gap + separation score instead of gap plus
 * silhouette.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AscStatus asc_config_set_literal_k_score(struct AscConfigHandle *cfg, bool on);

/**
 * Full fused run.
 *
 * `numeric` is `n x p`, `counts` is `n x q` term counts. The constraint
 * arrays hold sample indices and may be null when their length is 0; with
 * no constraints the config must carry a fixed lambda. On success `*out`
 * receives a result handle.
 *
 * # Safety
 * Pointers must reference the stated number of elements; `out` must be
 * writable.
 */
enum AscStatus asc_run(const struct AscConfigHandle *cfg,
                       const double *numeric,
                       size_t n,
                       size_t p,
                       const uint32_t *counts,
                       size_t q,
                       const size_t *must_link,
                       size_t must_link_len,
                       const size_t *cannot_link,
                       size_t cannot_link_len,
                       struct AscResultHandle **out);

/**
 * Laplacian, eigengap candidates and clustering on a caller-built `n x n`
 * similarity matrix (symmetric, finite, non-negative). Metrics are taken in
 * the spectral embedding.
 *
 * # Safety
 * `w` must hold `n * n` values; `out` must be writable.
 */
enum AscStatus asc_cluster_similarity(const struct AscConfigHandle *cfg,
                                      const double *w,
                                      size_t n,
                                      struct AscResultHandle **out);

/**
 * # Safety
 * `res` is null or a live result handle.
 */
void asc_result_free(struct AscResultHandle *res);

/**
 * Number of samples; 0 for a null handle.
 *
 * # Safety
 * `res` is null or a live result handle.
 */
size_t asc_result_n(const struct AscResultHandle *res);

/**
 * Chosen cluster count; 0 for a null handle.
 *
 * # Safety
 * `res` is null or a live result handle.
 */
size_t asc_result_k(const struct AscResultHandle *res);

/**
 * Copy `n` labels (0-based cluster indices) into `labels`, which holds `len`
 * slots.
 *
 * # Safety
 * `labels` must be writable for `len` elements.
 */
enum AscStatus asc_result_labels(const struct AscResultHandle *res, size_t *labels, size_t len);

/**
 * Number of eigengap candidates.
 *
 * # Safety
 * `res` is null or a live result handle.
 */
size_t asc_result_candidate_count(const struct AscResultHandle *res);

/**
 * # Safety
 * `out` must be writable for `len` elements.
 */
enum AscStatus asc_result_candidates(const struct AscResultHandle *res, size_t *out, size_t len);

/**
 * Fusion weight used, or NaN for runs without fusion and null handles.
 *
 * # Safety
 * `res` is null or a live result handle.
 */
double asc_result_lambda(const struct AscResultHandle *res);

/**
 * Mean silhouette; NaN for a null handle.
 *
 * # Safety
 * `res` is null or a live result handle.
 */
double asc_result_silhouette(const struct AscResultHandle *res);

/**
 * Intra/inter distance ratio; NaN when undefined.
 *
 * # Safety
 * `res` is null or a live result handle.
 */
double asc_result_intra_inter(const struct AscResultHandle *res);

/**
 * Calinski-Harabasz index; NaN when undefined.
 *
 * # Safety
 * `res` is null or a live result handle.
 */
double asc_result_chc(const struct AscResultHandle *res);

/**
 * Davies-Bouldin index; NaN when undefined.
 *
 * # Safety
 * `res` is null or a live result handle.
 */
double asc_result_dbi(const struct AscResultHandle *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASC_H */
