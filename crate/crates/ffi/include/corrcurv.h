#ifndef CORRCURV_H
#define CORRCURV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status code of every fallible call.
 */
typedef enum CcStatus {
  CC_STATUS_OK = 0,
  CC_STATUS_GAP_CLOSURE = 1,
  CC_STATUS_NON_INTEGER_CHERN = 2,
  CC_STATUS_EMPTY_DENSITY = 3,
  CC_STATUS_ZERO_NOISE = 4,
  CC_STATUS_NOT_CONVERGED = 5,
  CC_STATUS_DOMAIN = 6,
  CC_STATUS_INVALID_ARGUMENT = 7,
  CC_STATUS_DIMENSION_TOO_LARGE = 8,
  CC_STATUS_ZERO_CURRENT_NORM = 9,
  CC_STATUS_CHAIN_TERMINATED = 10,
  CC_STATUS_DIAGONALIZATION = 11,
  CC_STATUS_NULL_POINTER = 12,
  CC_STATUS_BUFFER_TOO_SMALL = 13,
  CC_STATUS_PANIC = 14,
} CcStatus;

typedef enum CcModelKind {
  CC_MODEL_KIND_QWZ = 0,
  CC_MODEL_KIND_FLAT_CHERN = 1,
  CC_MODEL_KIND_TRIVIAL_FLAT = 2,
} CcModelKind;

/**
 * Opaque k-mesh of metric and curvature data.
 */
typedef struct CcBandGrid CcBandGrid;

/**
 * Opaque diagonalized fermion ring.
 */
typedef struct CcEdSystem CcEdSystem;

/**
 * Opaque delta-peak spectral density.
 */
typedef struct CcSpectralDensity CcSpectralDensity;

/**
 * Supremum constants of the order-n bound.
 */
typedef struct CcBoundConstants {
  uint32_t order;
  double x_star;
  double sup_val;
  double a_const;
} CcBoundConstants;

/**
 * Two-band model: QWZ mass `m` and flat-band gap `delta`.
 */
typedef struct CcModelParams {
  enum CcModelKind kind;
  double m;
  double delta;
} CcModelParams;

typedef struct CcB1Check {
  double b1_sq;
  double midpoint_ratio;
  double bound_margin;
  bool holds;
  bool universal_holds;
} CcB1Check;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length including the NUL,
 * or 0 if there is no message.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t cc_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cc_version(void);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum CcStatus cc_bound_constants(uint32_t order, struct CcBoundConstants *out);

/**
 * Chern number of the lower band on an `n × n` mesh.
 *
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum CcStatus cc_chern_number(const struct CcModelParams *params, size_t n, int64_t *out);

/**
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum CcStatus cc_band_grid_new(const struct CcModelParams *params,
                               size_t n,
                               struct CcBandGrid **out);

/**
 * # Safety
 * `grid` must be NULL or a handle from [`cc_band_grid_new`] not yet freed.
 */
void cc_band_grid_free(struct CcBandGrid *grid);

/**
 * Number of mesh points per direction.
 *
 * # Safety
 * `grid` must be NULL or a live handle.
 */
size_t cc_band_grid_size(const struct CcBandGrid *grid);

/**
 * Equal-time sum `Σ_k Δ² coth(βΔ/2) G_xx (2π/n)²`; `beta = INFINITY` gives
 * the zero-temperature limit.
 *
 * # Safety
 * `grid` and `out` must be valid pointers.
 */
enum CcStatus cc_band_grid_noise_sum(const struct CcBandGrid *grid, double beta, double *out);

/**
 * # Safety
 * `grid` and `out` must be valid pointers.
 */
enum CcStatus cc_band_grid_curvature_sum(const struct CcBandGrid *grid, double beta, double *out);

/**
 * Writes rows `kx, ky, gap, Gxx, Gxy, Gyy, Omega` (7 doubles per point,
 * row-major mesh order) into `buf` of `len` doubles.
 *
 * # Safety
 * `grid` must be valid; `buf` must point to `len` writable doubles.
 */
enum CcStatus cc_band_grid_points(const struct CcBandGrid *grid, double *buf, size_t len);

/**
 * `ρ₀` from the band sums.
 *
 * # Safety
 * `grid` and `out` must be valid pointers.
 */
enum CcStatus cc_rho0_band(const struct CcBandGrid *grid, double beta, double *out);

/**
 * Density from `len` peaks at `omegas[i] ≥ 0` with weights `weights[i] ≥ 0`.
 *
 * # Safety
 * `omegas` and `weights` must point to `len` doubles; `out` must be valid.
 */
enum CcStatus cc_density_new(const double *omegas,
                             const double *weights,
                             size_t len,
                             struct CcSpectralDensity **out);

/**
 * Interband spectral density of a band grid.
 *
 * # Safety
 * `grid` and `out` must be valid pointers.
 */
enum CcStatus cc_density_from_band_grid(const struct CcBandGrid *grid,
                                        struct CcSpectralDensity **out);

/**
 * # Safety
 * `d` must be NULL or a live density handle.
 */
void cc_density_free(struct CcSpectralDensity *d);

/**
 * Number of peaks.
 *
 * # Safety
 * `d` must be NULL or a live handle.
 */
size_t cc_density_len(const struct CcSpectralDensity *d);

/**
 * `S(τ_j)` on `n_tau` (odd) evenly spaced points of `[0, β]`.
 *
 * # Safety
 * `d` must be valid; `values` must point to `n_tau` writable doubles.
 */
enum CcStatus cc_correlator(const struct CcSpectralDensity *d,
                            double beta,
                            size_t n_tau,
                            double *values);

/**
 * # Safety
 * `d` and `out` must be valid pointers.
 */
enum CcStatus cc_equal_time(const struct CcSpectralDensity *d, double beta, double *out);

/**
 * # Safety
 * `d` and `out` must be valid pointers.
 */
enum CcStatus cc_rho0_spectral(const struct CcSpectralDensity *d, double beta, double *out);

/**
 * Accelerated `(1/β) Σ_n (−1)ⁿ S(iω_n)`, equal to `S(β/2)`.
 *
 * # Safety
 * `d` and `out` must be valid pointers.
 */
enum CcStatus cc_alternating_sum(const struct CcSpectralDensity *d,
                                 double beta,
                                 size_t max_index,
                                 double *out);

/**
 * Margin of the order-n universal bound.
 *
 * # Safety
 * `d` and `out` must be valid pointers.
 */
enum CcStatus cc_check_bound(const struct CcSpectralDensity *d,
                             double beta,
                             uint32_t order,
                             double *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum CcStatus cc_ed_new(size_t sites,
                        double hopping,
                        double interaction,
                        size_t particles,
                        struct CcEdSystem **out);

/**
 * # Safety
 * `sys` must be NULL or a live handle.
 */
void cc_ed_free(struct CcEdSystem *sys);

/**
 * Hilbert-space dimension.
 *
 * # Safety
 * `sys` must be NULL or a live handle.
 */
size_t cc_ed_dimension(const struct CcEdSystem *sys);

/**
 * Copies the ascending energies into `buf` of `len` doubles.
 *
 * # Safety
 * `sys` must be valid; `buf` must point to `len` writable doubles.
 */
enum CcStatus cc_ed_energies(const struct CcEdSystem *sys, double *buf, size_t len);

/**
 * Mori chain up to `levels` coefficients. `b_sq` receives the valid
 * coefficients and `out_len` their count; `out_terminated_at` is the level
 * at which the Krylov space closed, or 0.
 *
 * # Safety
 * `sys` must be valid; `b_sq` must point to `levels` writable doubles; the
 * other out-pointers must be valid.
 */
enum CcStatus cc_mori_chain(const struct CcEdSystem *sys,
                            double beta,
                            size_t levels,
                            double *out_norm0,
                            double *b_sq,
                            size_t *out_len,
                            size_t *out_terminated_at);

/**
 * # Safety
 * `sys` and `out` must be valid pointers.
 */
enum CcStatus cc_b1_bound_check(const struct CcEdSystem *sys, double beta, struct CcB1Check *out);

/**
 * `⟨(LⁿJ)(τ) J⟩` from the Lehmann sum.
 *
 * # Safety
 * `sys` and `out` must be valid pointers.
 */
enum CcStatus cc_nested_correlator(const struct CcEdSystem *sys,
                                   uint32_t order,
                                   double tau,
                                   double beta,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CORRCURV_H */
