/* Generated by cbindgen; do not edit. */

#ifndef PLURIFORM_H
#define PLURIFORM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of the C interface.
 */
typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_DOMAIN = 2,
  PF_STATUS_PARAMETER = 3,
  PF_STATUS_DEGENERACY = 4,
  PF_STATUS_INVERSION = 5,
  PF_STATUS_DIMENSION = 6,
  PF_STATUS_INDEX = 7,
  PF_STATUS_USAGE = 8,
  PF_STATUS_IO = 9,
  PF_STATUS_PANIC = 10,
} PfStatus;

/**
 * Boundary condition of the Toda chain.
 */
typedef enum PfBoundary {
  PF_BOUNDARY_PERIODIC = 0,
  PF_BOUNDARY_OPEN_END = 1,
} PfBoundary;

/**
 * Opaque handle to a Lagrangian system with its symmetries.
 */
typedef struct PfSystem PfSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Kepler problem with one Runge–Lenz symmetry.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum PfStatus pf_system_kepler(double alpha, struct PfSystem **out);

/**
 * Kepler problem with all three Runge–Lenz symmetries.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum PfStatus pf_system_kepler_runge_lenz(double alpha, struct PfSystem **out);

/**
 * Toda chain of `n ≥ 3` particles.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum PfStatus pf_system_toda(size_t n, enum PfBoundary boundary, struct PfSystem **out);

/**
 * One-dimensional harmonic oscillator with energy symmetry.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum PfStatus pf_system_harmonic(double omega, struct PfSystem **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `sys` must be null or a handle from a `pf_system_*` constructor not yet freed.
 */
void pf_system_free(struct PfSystem *sys);

/**
 * Configuration dimension, or 0 for a null handle.
 *
 * # Safety
 * `sys` must be null or a live handle.
 */
size_t pf_system_dim(const struct PfSystem *sys);

/**
 * Number of symmetries `m`, or 0 for a null handle.
 *
 * # Safety
 * `sys` must be null or a live handle.
 */
size_t pf_system_symmetry_count(const struct PfSystem *sys);

/**
 * `L(x, ẋ)`.
 *
 * # Safety
 * `x` and `xdot` must point to `n` doubles, `out` to one.
 */
enum PfStatus pf_lagrangian(const struct PfSystem *sys,
                            const double *x,
                            const double *xdot,
                            size_t n,
                            double *out);

/**
 * Acceleration `ẍ` solving the Euler–Lagrange equations; writes `n` doubles.
 *
 * # Safety
 * `x`, `xdot` and `out` must point to `n` doubles.
 */
enum PfStatus pf_accel(const struct PfSystem *sys,
                       const double *x,
                       const double *xdot,
                       size_t n,
                       double *out);

/**
 * Noether integral `J_k(x, ẋ)` for `1 ≤ k ≤ m`.
 *
 * # Safety
 * `x` and `xdot` must point to `n` doubles, `out` to one.
 */
enum PfStatus pf_noether_integral(const struct PfSystem *sys,
                                  size_t k,
                                  const double *x,
                                  const double *xdot,
                                  size_t n,
                                  double *out);

/**
 * `H_k(x, p)`; `k = 0` gives the Hamiltonian `H`.
 *
 * # Safety
 * `x` and `p` must point to `n` doubles, `out` to one.
 */
enum PfStatus pf_hamiltonian(const struct PfSystem *sys,
                             size_t k,
                             const double *x,
                             const double *p,
                             size_t n,
                             double *out);

/**
 * Canonical bracket `{H_k, H_l}(x, p)`; index 0 is `H`.
 *
 * # Safety
 * `x` and `p` must point to `n` doubles, `out` to one.
 */
enum PfStatus pf_poisson_bracket(const struct PfSystem *sys,
                                 size_t k,
                                 size_t l,
                                 const double *x,
                                 const double *p,
                                 size_t n,
                                 double *out);

/**
 * Runs verification checks and returns the JSON report through `out_json`.
 * `config_json` follows the run-configuration schema (null means defaults);
 * `checks` is a comma-separated list or `"all"` (null means all).
 * A completed run returns `Ok` even when checks fail; inspect `all_pass`.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out_json` must be valid for writing a pointer.
 */
enum PfStatus pf_verify_json(const char *config_json, const char *checks, char **out_json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void pf_string_free(char *s);

/**
 * Message of the last failed call on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *pf_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLURIFORM_H */
