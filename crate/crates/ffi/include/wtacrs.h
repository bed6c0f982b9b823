#ifndef WTACRS_H
#define WTACRS_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a call.
typedef enum WtaStatus {
  WTA_STATUS_OK = 0,
  WTA_STATUS_NULL_POINTER = 1,
  WTA_STATUS_INVALID_ARGUMENT = 2,
  WTA_STATUS_SHAPE = 3,
  WTA_STATUS_NON_FINITE = 4,
  WTA_STATUS_DEGENERATE = 5,
  WTA_STATUS_UNDEFINED_TERM = 6,
  WTA_STATUS_BUFFER_TOO_SMALL = 7,
  WTA_STATUS_INTERNAL = 8,
} WtaStatus;

// Opaque dense matrix.
typedef struct WtaMatrix WtaMatrix;

// Opaque seeded random stream.
typedef struct WtaRng WtaRng;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread. Valid until the next
// failing call on the same thread.
const char *wta_last_error(void);

// Library version as a static string.
const char *wta_version(void);

// Copies `rows * cols` row-major values into a new matrix.
//
// # Safety
// `data` must point to `rows * cols` readable doubles; `out` must be
// writable.
enum WtaStatus wta_matrix_new(size_t rows, size_t cols, const double *data, struct WtaMatrix **out);

// # Safety
// `m` must come from this library and not be used afterwards. Null is
// ignored.
void wta_matrix_free(struct WtaMatrix *m);

// # Safety
// `m` must be a live matrix or null (which gives 0).
size_t wta_matrix_rows(const struct WtaMatrix *m);

// # Safety
// `m` must be a live matrix or null (which gives 0).
size_t wta_matrix_cols(const struct WtaMatrix *m);

// Copies the row-major values into `buf`, which holds `len` doubles.
//
// # Safety
// `m` must be a live matrix; `buf` must have room for `len` doubles.
enum WtaStatus wta_matrix_copy_data(const struct WtaMatrix *m, double *buf, size_t len);

// New random stream; equal `(seed, stream)` pairs give equal draws.
struct WtaRng *wta_rng_new(uint64_t seed, uint64_t stream);

// # Safety
// `rng` must come from [`wta_rng_new`] and not be used afterwards. Null is
// ignored.
void wta_rng_free(struct WtaRng *rng);

// Exact product `x · y`.
//
// # Safety
// `x` and `y` must be live matrices; `out` must be writable.
enum WtaStatus wta_matmul(const struct WtaMatrix *x,
                          const struct WtaMatrix *y,
                          struct WtaMatrix **out);

// CRS estimate of `x · y` from `k` sampled pairs.
//
// # Safety
// Handles must be live; `out` must be writable.
enum WtaStatus wta_estimate_crs(const struct WtaMatrix *x,
                                const struct WtaMatrix *y,
                                size_t k,
                                struct WtaRng *rng,
                                struct WtaMatrix **out);

// WTA-CRS estimate of `x · y` with budget `k` and the variance-optimal head.
//
// # Safety
// Handles must be live; `out` must be writable.
enum WtaStatus wta_estimate_wta_crs(const struct WtaMatrix *x,
                                    const struct WtaMatrix *y,
                                    size_t k,
                                    struct WtaRng *rng,
                                    struct WtaMatrix **out);

// Sum of the `k` most probable pair terms.
//
// # Safety
// Handles must be live; `out` must be writable.
enum WtaStatus wta_estimate_deterministic(const struct WtaMatrix *x,
                                          const struct WtaMatrix *y,
                                          size_t k,
                                          struct WtaMatrix **out);

// Writes the norm-product distribution of `x · y` into `probs`, which holds
// `len ≥ x.cols` doubles.
//
// # Safety
// Handles must be live; `probs` must have room for `len` doubles.
enum WtaStatus wta_col_row_distribution(const struct WtaMatrix *x,
                                        const struct WtaMatrix *y,
                                        double *probs,
                                        size_t len);

// Variance-optimal head size for budget `k` under `probs[0..len]`.
//
// # Safety
// `probs` must hold `len` doubles; `out` must be writable.
enum WtaStatus wta_optimal_det_size(const double *probs, size_t len, size_t k, size_t *out);

// `E‖g - xy‖²_F` of CRS at the norm-product distribution.
//
// # Safety
// Handles must be live; `out` must be writable.
enum WtaStatus wta_theoretical_crs_variance(const struct WtaMatrix *x,
                                            const struct WtaMatrix *y,
                                            size_t k,
                                            double *out);

// `E‖ĝ - xy‖²_F` of WTA-CRS at the norm-product distribution and the
// variance-optimal head.
//
// # Safety
// Handles must be live; `out` must be writable.
enum WtaStatus wta_theoretical_wta_variance(const struct WtaMatrix *x,
                                            const struct WtaMatrix *y,
                                            size_t k,
                                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WTACRS_H */
