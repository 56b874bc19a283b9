#ifndef DCBELL_H
#define DCBELL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum DcbStatus {
  DCB_STATUS_OK = 0,
  DCB_STATUS_INVALID_ARGUMENT = 1,
  DCB_STATUS_DEGENERATE_INPUT = 2,
  DCB_STATUS_NUMERICAL_VALIDATION = 3,
  DCB_STATUS_NULL_POINTER = 4,
  DCB_STATUS_CONFIG = 5,
  DCB_STATUS_PANIC = 6,
} DcbStatus;

// Opaque state handle: a hybrid state with its Schmidt decomposition.
typedef struct DcbState DcbState;

typedef struct DcbSchmidt {
  double kappa1;
  double kappa2;
  double kappa_product;
  double z_re;
  double z_im;
  // Product state (`κ₂ = 0`).
  bool degenerate;
  bool linear_polarizer_realizable;
} DcbSchmidt;

typedef struct DcbSettings {
  double alpha;
  double alpha_prime;
  double beta;
  double beta_prime;
} DcbSettings;

typedef struct DcbEstimate {
  double value;
  double std_error;
  uint64_t n_events;
  uint64_t seed;
} DcbEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread; empty after a success.
// The pointer stays valid until the next call into this library on the same thread.
const char *dcb_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *dcb_version(void);

// `cosθ|H⟩h + sinθ|V⟩v` with `h` a Gaussian and `⟨h|v⟩ = z`, on an `n`-node
// uniform grid over `[lo, hi]`.
//
// # Safety
// `out` must be valid for writes.
enum DcbStatus dcb_state_new_overlap(double theta,
                                     double z_re,
                                     double z_im,
                                     size_t n,
                                     double lo,
                                     double hi,
                                     struct DcbState **out);

// Gaussian bundles `h ~ N(mu_h, sigma_h)` and `v ~ N(mu_v, sigma_v)` (amplitude
// `exp(−(q−μ)²/(4σ²))`, normalized on the grid).
//
// # Safety
// `out` must be valid for writes.
enum DcbStatus dcb_state_new_gaussians(double theta,
                                       double mu_h,
                                       double sigma_h,
                                       double mu_v,
                                       double sigma_v,
                                       size_t n,
                                       double lo,
                                       double hi,
                                       struct DcbState **out);

// State from tabulated amplitudes on a uniform `n`-node grid over `[lo, hi]`.
// Each of `h_re`, `h_im`, `v_re`, `v_im` holds `n` values; bundles are
// normalized before use.
//
// # Safety
// The four arrays must hold `n` readable doubles; `out` must be valid for writes.
enum DcbStatus dcb_state_new_tabulated(double theta,
                                       size_t n,
                                       double lo,
                                       double hi,
                                       const double *h_re,
                                       const double *h_im,
                                       const double *v_re,
                                       const double *v_im,
                                       struct DcbState **out);

// State described by a JSON run configuration file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid for writes.
enum DcbStatus dcb_state_from_config(const char *path, struct DcbState **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `state` must come from a `dcb_state_new_*` call and not have been freed.
void dcb_state_free(struct DcbState *state);

// # Safety
// `state` must be a live handle; `out` must be valid for writes.
enum DcbStatus dcb_state_schmidt(const struct DcbState *state, struct DcbSchmidt *out);

// `α = 0, α′ = π/4, β = π/8, β′ = 3π/8`.
//
// # Safety
// `out` must be valid for writes.
enum DcbStatus dcb_canonical_settings(struct DcbSettings *out);

// `P_ij(α,β)` with outcomes `i, j ∈ {1, 2}`.
//
// # Safety
// `state` must be a live handle; `out` must be valid for writes.
enum DcbStatus dcb_joint_probability(const struct DcbState *state,
                                     uint8_t i,
                                     uint8_t j,
                                     double alpha,
                                     double beta,
                                     double *out);

// `C(α,β)`.
//
// # Safety
// `state` must be a live handle; `out` must be valid for writes.
enum DcbStatus dcb_correlation(const struct DcbState *state,
                               double alpha,
                               double beta,
                               double *out);

// CHSH value from direct joint probabilities.
//
// # Safety
// `state` must be a live handle, `settings` readable, `out` valid for writes.
enum DcbStatus dcb_bell_value(const struct DcbState *state,
                              const struct DcbSettings *settings,
                              double *out);

// `√2(2κ₁κ₂+1)`.
double dcb_canonical_bell(double kappa1, double kappa2);

// Settings maximizing the CHSH value for the given Schmidt coefficients.
//
// # Safety
// `out_settings` and `out_bell` must be valid for writes.
enum DcbStatus dcb_optimize_settings(double kappa1,
                                     double kappa2,
                                     struct DcbSettings *out_settings,
                                     double *out_bell);

// Four-fold coincidence probability `P_TT̄AĀ(α,β)` of the stripping protocol.
//
// # Safety
// `state` must be a live handle; `out` must be valid for writes.
enum DcbStatus dcb_four_photon_probability(const struct DcbState *state,
                                           double alpha,
                                           double beta,
                                           double *out);

// CHSH value assembled from four-photon reconstructions with exact probabilities.
//
// # Safety
// `state` must be a live handle, `settings` readable, `out` valid for writes.
enum DcbStatus dcb_protocol_bell(const struct DcbState *state,
                                 const struct DcbSettings *settings,
                                 double *out);

// Monte Carlo CHSH estimate with `n_events` trials per run. With `calibrate`
// false the true Schmidt form replaces the simulated calibration.
//
// # Safety
// `state` must be a live handle, `settings` readable, `out` valid for writes.
enum DcbStatus dcb_mc_estimate_bell(const struct DcbState *state,
                                    const struct DcbSettings *settings,
                                    uint64_t n_events,
                                    uint64_t seed,
                                    bool calibrate,
                                    struct DcbEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCBELL_H */
