#ifndef REFLECTWALK_H
#define REFLECTWALK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum RwStatus {
  RW_STATUS_OK = 0,
  RW_STATUS_NULL_POINTER = 1,
  RW_STATUS_INVALID_LAW = 2,
  RW_STATUS_INVALID_ARGUMENT = 3,
  /**
   * The law's regime is outside what the call supports.
   */
  RW_STATUS_UNSUPPORTED = 4,
  /**
   * A numerical check or solver failed.
   */
  RW_STATUS_NUMERICAL = 5,
  /**
   * The requested table exceeds the memory cap.
   */
  RW_STATUS_TOO_LARGE = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  RW_STATUS_PANIC = 7,
} RwStatus;

typedef enum RwRegime {
  RW_REGIME_CENTERED = 0,
  RW_REGIME_POSITIVE_DRIFT = 1,
  RW_REGIME_NEGATIVE_DRIFT = 2,
} RwRegime;

/**
 * Opaque increment law.
 */
typedef struct RwLaw RwLaw;

typedef struct RwMoments {
  double drift;
  double variance;
} RwMoments;

typedef struct RwTilt {
  double r0;
  double rho0;
  /**
   * `1/rho0`.
   */
  double radius;
} RwTilt;

typedef struct RwHypotheses {
  bool adapted;
  bool aperiodic;
  double drift;
  enum RwRegime regime;
} RwHypotheses;

/**
 * Leading term `C·ρⁿ·n^(−β)` of `P_x[X_n = y]`.
 */
typedef struct RwAsymptotic {
  enum RwRegime regime;
  double rho;
  double beta;
  double constant;
} RwAsymptotic;

typedef struct RwEstimate {
  double point;
  double stderr;
  uint64_t count;
} RwEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a law from `len` masses at `lo, lo+1, …`.
 *
 * # Safety
 * `masses` must point to `len` readable doubles; `out` must be writable.
 */
enum RwStatus rw_law_new(int64_t lo, const double *masses, size_t len, struct RwLaw **out);

/**
 * Parses a law from its JSON text, e.g. `{"masses": {"-1": 0.5, "1": 0.5}}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum RwStatus rw_law_from_json(const char *json, struct RwLaw **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `law` must come from this library and not be used afterwards.
 */
void rw_law_free(struct RwLaw *law);

/**
 * `μ̂(r) = Σ μ(k) rᵏ` for `r > 0`.
 *
 * # Safety
 * `law` must be a live handle; `out` must be writable.
 */
enum RwStatus rw_law_mgf(const struct RwLaw *law, double r, double *out);

/**
 * # Safety
 * `law` must be a live handle; `out` must be writable.
 */
enum RwStatus rw_law_moments(const struct RwLaw *law, struct RwMoments *out);

/**
 * # Safety
 * `law` must be a live handle; `out` must be writable.
 */
enum RwStatus rw_law_minimize_mgf(const struct RwLaw *law, struct RwTilt *out);

/**
 * Pass `drift_tol <= 0` for the library default.
 *
 * # Safety
 * `law` must be a live handle; `out` must be writable.
 */
enum RwStatus rw_law_check_hypotheses(const struct RwLaw *law,
                                      double drift_tol,
                                      struct RwHypotheses *out);

/**
 * New handle for the law tilted by `r`: `μ_r(k) = μ(k) rᵏ / μ̂(r)`.
 *
 * # Safety
 * `law` must be a live handle; `out` must be writable.
 */
enum RwStatus rw_law_tilt(const struct RwLaw *law, double r, struct RwLaw **out);

/**
 * Exact `P_x[X_n = y]` by dynamic programming.
 *
 * # Safety
 * `law` must be a live handle; `out` must be writable.
 */
enum RwStatus rw_exact_probability(const struct RwLaw *law,
                                   int64_t x,
                                   int64_t y,
                                   int64_t n,
                                   double *out);

/**
 * Asymptotic law of `P_x[X_n = y]` for a centered or positively drifted law.
 *
 * # Safety
 * `law` must be a live handle; `out` must be writable.
 */
enum RwStatus rw_constant(const struct RwLaw *law, int64_t x, int64_t y, struct RwAsymptotic *out);

/**
 * Evaluates the leading term at `n >= 1`.
 *
 * # Safety
 * `asym` must be readable; `out` must be writable.
 */
enum RwStatus rw_predict(const struct RwAsymptotic *asym, uint64_t n, double *out);

/**
 * Monte Carlo estimate of `P_x[X_n = y]` from `paths` seeded paths.
 *
 * # Safety
 * `law` must be a live handle; `out` must be writable.
 */
enum RwStatus rw_simulate_pxy(const struct RwLaw *law,
                              int64_t x,
                              int64_t y,
                              int64_t n,
                              uint64_t paths,
                              uint64_t seed,
                              struct RwEstimate *out);

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`) and returns its full length in bytes
 * without the terminator; 0 when no error has been recorded. A null `buf`
 * only queries the length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t rw_last_error_message(char *buf, size_t len);

/**
 * Static version string.
 */
const char *rw_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REFLECTWALK_H */
