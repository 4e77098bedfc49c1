#ifndef TWISTLAB_H
#define TWISTLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call.
 */
typedef enum TwistlabStatus {
  TWISTLAB_STATUS_OK = 0,
  TWISTLAB_STATUS_NULL_POINTER = 1,
  TWISTLAB_STATUS_INVALID_ARGUMENT = 2,
  TWISTLAB_STATUS_CAPACITY = 3,
  TWISTLAB_STATUS_POLE = 4,
  TWISTLAB_STATUS_QUADRATURE = 5,
  TWISTLAB_STATUS_REFINEMENT = 6,
  TWISTLAB_STATUS_NO_SATURATION = 7,
  TWISTLAB_STATUS_DIVERGENCE = 8,
  TWISTLAB_STATUS_NUMERICAL = 9,
  TWISTLAB_STATUS_CONFIG = 10,
  TWISTLAB_STATUS_IO = 11,
  /**
   * A run finished but at least one invariant check failed.
   */
  TWISTLAB_STATUS_INVARIANT_FAILED = 12,
  TWISTLAB_STATUS_PANIC = 13,
} TwistlabStatus;

typedef enum TwistlabFamily {
  TWISTLAB_FAMILY_TRANSVERSE_ISING = 0,
  TWISTLAB_FAMILY_XX = 1,
  TWISTLAB_FAMILY_HEISENBERG = 2,
} TwistlabFamily;

typedef enum TwistlabBoundary {
  TWISTLAB_BOUNDARY_OPEN = 0,
  TWISTLAB_BOUNDARY_PERIODIC = 1,
} TwistlabBoundary;

typedef enum TwistlabTwistKind {
  /**
   * `<σ¹_x σ¹_x'>`.
   */
  TWISTLAB_TWIST_KIND_ORDER = 0,
  /**
   * `<∏_{x≤y<x'} σ³_y>`.
   */
  TWISTLAB_TWIST_KIND_DISORDER = 1,
} TwistlabTwistKind;

typedef enum TwistlabFormat {
  TWISTLAB_FORMAT_CSV = 0,
  TWISTLAB_FORMAT_JSON = 1,
} TwistlabFormat;

/**
 * A spin-chain Hamiltonian.
 */
typedef struct TwistlabChain TwistlabChain;

/**
 * Majorana covariance of a Gaussian state.
 */
typedef struct TwistlabCovariance TwistlabCovariance;

/**
 * Thermal samples of Toda stretches.
 */
typedef struct TwistlabTodaEnsemble TwistlabTodaEnsemble;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *twistlab_version(void);

/**
 * Size in bytes (including the terminating NUL) of the last error message on this
 * thread, or 0 when no call has failed yet.
 */
size_t twistlab_last_error_length(void);

/**
 * Copies the last error message into `buf` (truncated to `len` bytes, always
 * NUL-terminated when `len > 0`). Returns the size needed for the full message.
 *
 * # Safety
 * `buf` must be NULL or point to at least `len` writable bytes.
 */
size_t twistlab_last_error_message(char *buf, size_t len);

/**
 * Creates a chain. Transverse Ising: `−(J/2)Σ(σ¹σ¹ + h σ³)`; XX:
 * `−(J/2)Σ(σ¹σ¹ + σ²σ²) − (J h/2)Σσ³`; Heisenberg: `J Σ σ⃗·σ⃗ + h Σ σ³`.
 * Only the first two have Gaussian states.
 *
 * # Safety
 * `out_chain` must be a valid pointer.
 */
enum TwistlabStatus twistlab_chain_new(enum TwistlabFamily family,
                                       double j,
                                       double field,
                                       size_t length,
                                       enum TwistlabBoundary boundary,
                                       struct TwistlabChain **out_chain);

/**
 * # Safety
 * `chain` must be NULL or a handle from [`twistlab_chain_new`] not yet freed.
 */
void twistlab_chain_free(struct TwistlabChain *chain);

/**
 * Ground-state covariance of a transverse-Ising or XX chain and its energy.
 *
 * # Safety
 * `chain` must be a live handle; `out_cov` must be valid; `out_energy` may be NULL.
 */
enum TwistlabStatus twistlab_ground_covariance(const struct TwistlabChain *chain,
                                               struct TwistlabCovariance **out_cov,
                                               double *out_energy);

/**
 * Thermal covariance `e^{−βH}/Z` of an open transverse-Ising or XX chain.
 *
 * # Safety
 * `chain` must be a live handle and `out_cov` valid.
 */
enum TwistlabStatus twistlab_thermal_covariance(const struct TwistlabChain *chain,
                                                double beta,
                                                struct TwistlabCovariance **out_cov);

/**
 * # Safety
 * `cov` must be NULL or a live covariance handle.
 */
void twistlab_covariance_free(struct TwistlabCovariance *cov);

/**
 * # Safety
 * `cov` must be a live handle and `out_sites` valid.
 */
enum TwistlabStatus twistlab_covariance_sites(const struct TwistlabCovariance *cov,
                                              size_t *out_sites);

/**
 * Order or disorder two-point function between sites `x < xp`.
 *
 * # Safety
 * `cov` must be a live handle and `out_value` valid.
 */
enum TwistlabStatus twistlab_two_point(const struct TwistlabCovariance *cov,
                                       enum TwistlabTwistKind kind,
                                       size_t x,
                                       size_t xp,
                                       double *out_value);

/**
 * `<e^{iλN_A}>` for the region `A = [start, start+size)`.
 *
 * # Safety
 * `cov` must be a live handle; `out_re` and `out_im` valid.
 */
enum TwistlabStatus twistlab_fcs(const struct TwistlabCovariance *cov,
                                 size_t region_start,
                                 size_t region_size,
                                 double lambda,
                                 double *out_re,
                                 double *out_im);

/**
 * Rényi entropy of order `n` (von Neumann at `n = 1`) of `[start, start+size)`.
 *
 * # Safety
 * `cov` must be a live handle and `out_entropy` valid.
 */
enum TwistlabStatus twistlab_renyi(const struct TwistlabCovariance *cov,
                                   size_t region_start,
                                   size_t region_size,
                                   double n,
                                   double *out_entropy);

/**
 * Draws `draws` chains of `sites` Toda stretches at inverse temperature `beta` and pressure `pressure`.
 *
 * # Safety
 * `out_ensemble` must be valid.
 */
enum TwistlabStatus twistlab_toda_sample(double beta,
                                         double pressure,
                                         size_t sites,
                                         size_t draws,
                                         uint64_t seed,
                                         struct TwistlabTodaEnsemble **out_ensemble);

/**
 * # Safety
 * `ensemble` must be NULL or a live ensemble handle.
 */
void twistlab_toda_free(struct TwistlabTodaEnsemble *ensemble);

/**
 * Monte Carlo `<e^{λφ(x)}>` and its jackknife error.
 *
 * # Safety
 * `ensemble` must be a live handle; `out_mean` valid; `out_stderr` may be NULL.
 */
enum TwistlabStatus twistlab_toda_estimate(const struct TwistlabTodaEnsemble *ensemble,
                                           double lambda,
                                           size_t x,
                                           double *out_mean,
                                           double *out_stderr);

/**
 * Closed form `[β^λ Γ(P−λ)/Γ(P)]^x`.
 *
 * # Safety
 * `out_value` must be valid.
 */
enum TwistlabStatus twistlab_toda_oracle(double beta,
                                         double pressure,
                                         double lambda,
                                         size_t x,
                                         double *out_value);

/**
 * Ising disorder two-point function from the form-factor series truncated at
 * `truncation` (0 or 2) particles.
 *
 * # Safety
 * `out_value` must be valid.
 */
enum TwistlabStatus twistlab_ising_series(double mass,
                                          double vev,
                                          double r,
                                          size_t truncation,
                                          double *out_value);

/**
 * Runs a JSON run configuration (the format read by the `twistlab` binary; it must
 * name its `experiment`) and returns the emitted table in `*out_text`, to be released
 * with [`twistlab_string_free`]. Returns `TWISTLAB_STATUS_INVARIANT_FAILED` when the
 * run completed but a built-in check failed; the text is produced either way.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out_text` must be valid.
 */
enum TwistlabStatus twistlab_run_config(const char *config_json,
                                        enum TwistlabFormat format,
                                        char **out_text);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library and not yet freed.
 */
void twistlab_string_free(char *s);

/**
 * Exit code the `twistlab` binary would use for `status`.
 */
int twistlab_status_exit_code(enum TwistlabStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWISTLAB_H */
