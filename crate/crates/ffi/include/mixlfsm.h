#ifndef MIXLFSM_H
#define MIXLFSM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MLFSM_OK 0

#define MLFSM_ERR_CONFIG 2

#define MLFSM_ERR_INPUT 3

#define MLFSM_ERR_NUMERICAL 4

#define MLFSM_ERR_SOLVER 5

#define MLFSM_ERR_CAPACITY 6

/**
 * A required pointer argument was null.
 */
#define MLFSM_ERR_NULL 7

/**
 * A Rust panic was caught at the boundary.
 */
#define MLFSM_ERR_PANIC 8

/**
 * Opaque estimation result.
 */
typedef struct MlfsmEstimate MlfsmEstimate;

/**
 * Opaque mixed model `Σ b_j Y^{H_j, β_j}`.
 */
typedef struct MlfsmModel MlfsmModel;

/**
 * Opaque sampled path `X_Δ, …, X_{nΔ}`.
 */
typedef struct MlfsmPath MlfsmPath;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *mlfsm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mlfsm_version(void);

/**
 * Create a model of `q` components from three arrays of length `q`.
 *
 * # Safety
 * `b`, `hurst` and `beta` point to `q` readable doubles; `out` is writable.
 */
int32_t mlfsm_model_new(size_t q,
                        const double *b,
                        const double *hurst,
                        const double *beta,
                        struct MlfsmModel **out);

/**
 * # Safety
 * `model` is null or was returned by [`mlfsm_model_new`] and not yet freed.
 */
void mlfsm_model_free(struct MlfsmModel *model);

/**
 * Simulate `n` observations with step `delta`, kernel truncation sized for
 * increments of order `k` at lags up to `max_gamma`.
 *
 * # Safety
 * `model` is a live model handle; `out` is writable.
 */
int32_t mlfsm_simulate(const struct MlfsmModel *model,
                       size_t n,
                       double delta,
                       size_t k,
                       size_t max_gamma,
                       uint64_t seed,
                       struct MlfsmPath **out);

/**
 * Wrap `n` observed values with step `delta`.
 *
 * # Safety
 * `values` points to `n` readable doubles; `out` is writable.
 */
int32_t mlfsm_path_from_values(const double *values,
                               size_t n,
                               double delta,
                               struct MlfsmPath **out);

/**
 * Number of observations of a path (0 for null).
 *
 * # Safety
 * `path` is null or a live path handle.
 */
size_t mlfsm_path_len(const struct MlfsmPath *path);

/**
 * Copy up to `cap` values into `out`; fails when `cap` is too small.
 *
 * # Safety
 * `path` is a live path handle; `out` has room for `cap` doubles.
 */
int32_t mlfsm_path_values(const struct MlfsmPath *path, double *out, size_t cap);

/**
 * # Safety
 * `path` is null or a path handle not yet freed.
 */
void mlfsm_path_free(struct MlfsmPath *path);

/**
 * Fit `q` components with the adaptive equations on increments of order
 * `k`, using the default design and solver settings. A result is returned
 * even when the solver does not converge; check
 * [`mlfsm_estimate_converged`].
 *
 * # Safety
 * `path` is a live path handle; `out` is writable.
 */
int32_t mlfsm_estimate_adaptive(const struct MlfsmPath *path,
                                size_t q,
                                size_t k,
                                struct MlfsmEstimate **out);

/**
 * Length of θ̂ (0 for null).
 *
 * # Safety
 * `est` is null or a live estimate handle.
 */
size_t mlfsm_estimate_dim(const struct MlfsmEstimate *est);

/**
 * 1 when the solver converged, 0 otherwise (or for null).
 *
 * # Safety
 * `est` is null or a live estimate handle.
 */
int32_t mlfsm_estimate_converged(const struct MlfsmEstimate *est);

/**
 * Copy θ̂ `(b̃_1, H_1, β_1, …)` into `out`.
 *
 * # Safety
 * `est` is a live estimate handle; `out` has room for `cap` doubles.
 */
int32_t mlfsm_estimate_theta(const struct MlfsmEstimate *est, double *out, size_t cap);

/**
 * # Safety
 * `est` is null or an estimate handle not yet freed.
 */
void mlfsm_estimate_free(struct MlfsmEstimate *est);

/**
 * `n` symmetric stable draws with `E exp(iλZ) = exp(-|scale λ|^β)` from
 * stream `stream` of `seed`.
 *
 * # Safety
 * `out` has room for `n` doubles.
 */
int32_t mlfsm_sample_stable(double beta,
                            double scale,
                            size_t n,
                            uint64_t seed,
                            uint64_t stream,
                            double *out);

/**
 * `b̃ = b^β ∫|g_{H,β,k}|^β`.
 *
 * # Safety
 * `out` is writable.
 */
int32_t mlfsm_btilde(double b, double hurst, double beta, size_t k, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXLFSM_H */
