#ifndef SPHEREFLOW_H
#define SPHEREFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_BUFFER_TOO_SMALL = 3,
  SF_STATUS_BLOW_UP = 4,
  SF_STATUS_NON_CONVERGENCE = 5,
  SF_STATUS_NO_POSITIVE_SOLUTION = 6,
  SF_STATUS_IO = 7,
  SF_STATUS_PANIC = 8,
} SfStatus;

/**
 * Time integrator selector.
 */
typedef enum SfIntegrator {
  SF_INTEGRATOR_RK4 = 0,
  SF_INTEGRATOR_HEUN = 1,
} SfIntegrator;

/**
 * Ground-state solver selector.
 */
typedef enum SfMethod {
  /**
   * Normalized flow from the first mode until stationary.
   */
  SF_METHOD_FLOW = 0,
  /**
   * Sub/super-solution iteration with mass shooting (`p >= 3`), or the
   * first eigenfunction when `p = 2`.
   */
  SF_METHOD_SUB_SUPER = 1,
} SfMethod;

/**
 * Sine basis on an interval or rectangle.
 */
typedef struct SfBasis SfBasis;

/**
 * A running flow.
 */
typedef struct SfFlow SfFlow;

/**
 * One row of the energy ledger.
 */
typedef struct SfLedgerRow {
  double t;
  double energy;
  double s;
  double grad_m_sq;
  double dissipation_integral;
  double sphere_drift;
  double min_value;
} SfLedgerRow;

/**
 * Scalars describing a ground state.
 */
typedef struct SfGroundState {
  double lambda;
  double energy;
  double residual;
  uint64_t iterations;
} SfGroundState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library from the same thread.
 */
const char *sf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sf_version(void);

/**
 * Build the level-`level` basis on `[0, lengths[0]] (× [0, lengths[1]])`.
 */
enum SfStatus sf_basis_new(const double *lengths, size_t dim, uint32_t level, struct SfBasis **out);

void sf_basis_free(struct SfBasis *basis);

/**
 * Number of modes; 0 for a NULL handle.
 */
size_t sf_basis_len(const struct SfBasis *basis);

/**
 * Copy the eigenvalues into `out` (capacity `cap`).
 */
enum SfStatus sf_basis_eigenvalues(const struct SfBasis *basis, double *out, size_t cap);

/**
 * `ℰ(u) = ½‖∇u‖² + ‖u‖_p^p / p`.
 */
enum SfStatus sf_energy(const struct SfBasis *basis,
                        const double *coeffs,
                        size_t len,
                        double p,
                        double *out);

/**
 * `𝒮(u) = ‖∇u‖² + ‖u‖_p^p`.
 */
enum SfStatus sf_s_functional(const struct SfBasis *basis,
                              const double *coeffs,
                              size_t len,
                              double p,
                              double *out);

/**
 * Start a flow from `coeffs` on `basis` at the basis level, with per-step
 * renormalization when `renormalize` is nonzero. `stationarity_tol = 0`
 * never stops early.
 */
enum SfStatus sf_flow_new(const struct SfBasis *basis,
                          const double *coeffs,
                          size_t len,
                          double p,
                          double dt,
                          enum SfIntegrator integrator,
                          bool renormalize,
                          double stationarity_tol,
                          struct SfFlow **out);

void sf_flow_free(struct SfFlow *flow);

/**
 * Integrate to time `t`. `stationary` (may be NULL) reports an early stop.
 */
enum SfStatus sf_flow_advance(struct SfFlow *flow, double t, bool *stationary);

/**
 * Current time and coefficients; `t` may be NULL.
 */
enum SfStatus sf_flow_state(const struct SfFlow *flow, double *out, size_t cap, double *t);

/**
 * Number of ledger rows; 0 for a NULL handle.
 */
size_t sf_flow_ledger_len(const struct SfFlow *flow);

enum SfStatus sf_flow_ledger_row(const struct SfFlow *flow, size_t index, struct SfLedgerRow *out);

/**
 * Write the ledger as CSV to `path`.
 */
enum SfStatus sf_flow_write_ledger(const struct SfFlow *flow, const char *path);

/**
 * Positive unit-mass ground state on `basis`. The flow method integrates
 * with step `0.4 / λ_max` for at most time 50.
 */
enum SfStatus sf_ground_state(const struct SfBasis *basis,
                              double p,
                              enum SfMethod method,
                              double *out,
                              size_t cap,
                              struct SfGroundState *info);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPHEREFLOW_H */
