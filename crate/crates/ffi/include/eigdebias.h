#ifndef EIGDEBIAS_H
#define EIGDEBIAS_H

#include <stddef.h>

typedef enum EdStatus {
  ED_STATUS_OK = 0,
  ED_STATUS_INVALID_INPUT = 1,
  ED_STATUS_NUMERICAL_FAILURE = 2,
  ED_STATUS_DEGENERATE_SPECTRUM = 3,
  ED_STATUS_OUTSIDE_BULK_REQUIRED = 4,
  ED_STATUS_NULL_POINTER = 5,
  ED_STATUS_PANIC = 6,
} EdStatus;

/**
 * `p×n` data matrix, one sample per column.
 */
typedef struct EdDataMatrix EdDataMatrix;

/**
 * Symmetric `n×n` matrix.
 */
typedef struct EdSymMatrix EdSymMatrix;

/**
 * Plug-in and de-biased estimates of `aᵀu_l*`.
 */
typedef struct EdEstimate {
  double plugin;
  /**
   * `b_l` (denoising) or `c_l` (PCA).
   */
  double correction;
  double factor;
  double debiased;
  /**
   * PCA only: the noise level used, NaN when the formula did not need it.
   */
  double sigma2;
} EdEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a symmetric matrix from `n*n` row-major entries.
 *
 * # Safety
 * `entries` must point to `n*n` readable doubles and `out` must be writable.
 */
enum EdStatus ed_sym_matrix_new(size_t n, const double *entries, struct EdSymMatrix **out);

/**
 * # Safety
 * `m` must come from [`ed_sym_matrix_new`] and not be used afterwards.
 */
void ed_sym_matrix_free(struct EdSymMatrix *m);

/**
 * # Safety
 * `m` must be a live handle or null.
 */
size_t ed_sym_matrix_dim(const struct EdSymMatrix *m);

/**
 * Builds a `p×n` data matrix from `p*n` row-major entries.
 *
 * # Safety
 * `entries` must point to `p*n` readable doubles and `out` must be writable.
 */
enum EdStatus ed_data_matrix_new(size_t p,
                                 size_t n,
                                 const double *entries,
                                 struct EdDataMatrix **out);

/**
 * # Safety
 * `s` must come from [`ed_data_matrix_new`] and not be used afterwards.
 */
void ed_data_matrix_free(struct EdDataMatrix *s);

/**
 * De-biased estimate of `aᵀu_l*` from a noisy symmetric matrix with rank-`r`
 * signal and noise level `sigma`.
 *
 * # Safety
 * `m` must be a live handle, `a` must point to `a_len` doubles and `out`
 * must be writable.
 */
enum EdStatus ed_estimate_md(const struct EdSymMatrix *m,
                             const double *a,
                             size_t a_len,
                             size_t l,
                             size_t r,
                             double sigma,
                             struct EdEstimate *out);

/**
 * De-biased estimate of `aᵀu_l*` from spiked-covariance samples.
 *
 * Pass `sigma2 = NaN` to have the noise level estimated from the bulk
 * eigenvalues when the `n < p` formula needs it.
 *
 * # Safety
 * `s` must be a live handle, `a` must point to `a_len` doubles and `out`
 * must be writable.
 */
enum EdStatus ed_estimate_pca(const struct EdDataMatrix *s,
                              const double *a,
                              size_t a_len,
                              size_t l,
                              size_t r,
                              double sigma2,
                              struct EdEstimate *out);

/**
 * Semicircle-law approximation of `b_l` at an outlier eigenvalue.
 *
 * # Safety
 * `out` must be writable.
 */
enum EdStatus ed_semicircle_b(double lambda_l, double sigma, size_t n, double *out);

/**
 * Marchenko–Pastur approximation of `c_l` at an outlier eigenvalue.
 *
 * # Safety
 * `out` must be writable.
 */
enum EdStatus ed_mp_debias(double lambda_l, double sigma2, size_t n, size_t p, double *out);

/**
 * `min(|u_a − truth|, |u_a + truth|)`.
 */
double ed_dist(double u_a, double truth);

/**
 * `KL(N(0, Σ₁) ‖ N(0, Σ₀))` for one sample.
 *
 * # Safety
 * Both handles must be live and `out` must be writable.
 */
enum EdStatus ed_gaussian_kl(const struct EdSymMatrix *sigma0,
                             const struct EdSymMatrix *sigma1,
                             double *out);

/**
 * Message of the last failure on this thread; empty if none. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ed_last_error_message(void);

const char *ed_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EIGDEBIAS_H */
