#ifndef COLLAPSE_KINETICS_H
#define COLLAPSE_KINETICS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Kernel selectors for `ck_model_kernel`.
#define CK_KERNEL_D 0

#define CK_KERNEL_F 1

#define CK_KERNEL_I 2

// I(0, t) − I(r, t).
#define CK_KERNEL_I_DIFF 3

// Spatial Fourier transform of F; the first argument is the wavenumber.
#define CK_KERNEL_FOURIER_F 4

// Result code of every fallible call.
typedef enum CkStatus {
  CK_STATUS_OK = 0,
  // A required pointer argument was null.
  CK_STATUS_NULL_POINTER = 1,
  // Parameters outside the model's domain or an inconsistent request.
  CK_STATUS_VALIDATION = 2,
  // An integral or series failed to reach its tolerance.
  CK_STATUS_NON_CONVERGENCE = 3,
  // A covariance matrix was not positive semidefinite.
  CK_STATUS_NOT_PSD = 4,
  CK_STATUS_IO = 5,
  // The library panicked; the message holds the payload.
  CK_STATUS_INTERNAL = 6,
} CkStatus;

// Opaque noise model.
typedef struct CkModel CkModel;

// Bounds on E[p₁p₂].
typedef struct CkBounds {
  double lower;
  double upper;
} CkBounds;

// Dark-matter scenario in natural units (GeV).
typedef struct CkScenario {
  double mass;
  // rms velocity in units of c.
  double v_rms;
  // Mass density, GeV⁴.
  double density;
  // γ = 1/M², GeV⁻².
  double coupling;
  double nucleons_per_bunch;
  double bunches;
  double fifth_force_scale;
} CkScenario;

// Quantities derived from a `CkScenario`.
typedef struct CkScenarioDerived {
  double correlation_length;
  double temperature;
  double reduction_time;
  double chem_factor;
  double exponent_2gamma;
  // Nonzero when the dilute expansion does not apply.
  int32_t non_dilute;
} CkScenarioDerived;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// White noise of strength `coupling` smeared over `correlation_length`.
enum CkStatus ck_model_new_white(double coupling, double correlation_length, struct CkModel **out);

// Product correlator with a flat spectrum `level` below `cutoff` and zero
// above; a non-positive `cutoff` means no cutoff.
enum CkStatus ck_model_new_cutoff(double level,
                                  double cutoff,
                                  double correlation_length,
                                  struct CkModel **out);

// Relativistic Bose gas of a massive scalar.
enum CkStatus ck_model_new_thermal(double mass,
                                   double temperature,
                                   double chemical_potential,
                                   double coupling,
                                   struct CkModel **out);

// Non-relativistic dilute gas of a massive scalar.
enum CkStatus ck_model_new_dilute(double mass,
                                  double temperature,
                                  double chemical_potential,
                                  double coupling,
                                  struct CkModel **out);

// Thermal unparticle stuff of scaling dimension `dimension`.
enum CkStatus ck_model_new_unparticle(double dimension,
                                      double scale,
                                      double temperature,
                                      double chemical_potential,
                                      double coupling,
                                      struct CkModel **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `model` must be null or a handle from `ck_model_new_*` not yet freed.
void ck_model_free(struct CkModel *model);

// Evaluates the kernel chosen by `kind` (one of `CK_KERNEL_*`) at
// separation `r` (or wavenumber) and time `t`.
//
// # Safety
// `model` must be null or a live handle from `ck_model_new_*`.
enum CkStatus ck_model_kernel(const struct CkModel *model,
                              uint32_t kind,
                              double r,
                              double t,
                              double *out);

// Reduction rate Γ(t) between two branches. Positions are packed xyz
// triples; `couplings` gives each particle's coupling mass.
//
// # Safety
// `positions_*` must hold `3 * count_*` doubles and `couplings_*` must hold
// `count_*` doubles.
enum CkStatus ck_gamma_pair(const struct CkModel *model,
                            const double *positions_a,
                            const double *couplings_a,
                            uintptr_t count_a,
                            const double *positions_b,
                            const double *couplings_b,
                            uintptr_t count_b,
                            double t,
                            double *out);

// E[p₁p₂] for two branches at integrated rate Γ.
enum CkStatus ck_expected_p1p2(double gamma, double p1, double p2, double *out);

// Lower and upper bounds on E[p₁p₂] at integrated rate Γ from initial
// value `e0`.
enum CkStatus ck_reduction_bounds(double gamma, double e0, struct CkBounds *out);

// ∫₀^∞ xⁿ/(e^{(x−ζ)/T} − 1) dx.
enum CkStatus ck_bose_integral(double n, double zeta, double temperature, double *out);

// Correlation length, temperature, reduction time and reduction exponent
// of a dark-matter scenario.
//
// # Safety
// `scenario` must be null or point to a readable `CkScenario`.
enum CkStatus ck_dm_derived(const struct CkScenario *scenario, struct CkScenarioDerived *out);

// Message of the latest failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *ck_last_error_message(void);

// Clears the stored failure message.
void ck_clear_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COLLAPSE_KINETICS_H */
