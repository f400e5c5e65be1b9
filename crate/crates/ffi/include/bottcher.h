#ifndef BOTTCHER_H
#define BOTTCHER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every function.
typedef enum BottcherStatus {
  BOTTCHER_STATUS_OK = 0,
  BOTTCHER_STATUS_NULL_POINTER = 1,
  BOTTCHER_STATUS_INVALID_ARGUMENT = 2,
  BOTTCHER_STATUS_PARSE = 3,
  BOTTCHER_STATUS_DIMENSION_MISMATCH = 4,
  // the point is outside the basin or the orbit escaped
  BOTTCHER_STATUS_NOT_IN_BASIN = 5,
  // a numerical guard refused the computation (critical proximity, branch ambiguity, …)
  BOTTCHER_STATUS_REFUSED = 6,
  BOTTCHER_STATUS_NOT_CONVERGED = 7,
  // output buffer too small; the needed length is written to the length out-pointer
  BOTTCHER_STATUS_BUFFER_TOO_SMALL = 8,
  BOTTCHER_STATUS_PANIC = 9,
  BOTTCHER_STATUS_OTHER = 10,
} BottcherStatus;

// Böttcher coordinate Φ_n built from block-radial fields.
typedef struct BottcherCoordinate BottcherCoordinate;

// One-variable germ f(z) = a z^k + … with ascending coefficients.
typedef struct BottcherGerm1D BottcherGerm1D;

// Green-function evaluator for one germ.
typedef struct BottcherGreen BottcherGreen;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t bottcher_last_error(char *buf, uintptr_t len);

// Library version as a static NUL-terminated string.
const char *bottcher_version(void);

// # Safety
// `re`, `im` point to `n` doubles; `out_handle` is writable.
enum BottcherStatus bottcher_germ1d_new(const double *re,
                                        const double *im,
                                        uintptr_t n,
                                        struct BottcherGerm1D **out_handle);

// # Safety
// `h` is null or a handle from `bottcher_germ1d_new` not yet freed.
void bottcher_germ1d_free(struct BottcherGerm1D *h);

// φ(z) by the logarithmic limit.
//
// # Safety
// `h` is a live handle; out-pointers are writable.
enum BottcherStatus bottcher_germ1d_eval(const struct BottcherGerm1D *h,
                                         double z_re,
                                         double z_im,
                                         double *out_re,
                                         double *out_im);

// Coefficients c_2 … c_N of φ(z) = z + Σ c_n z^n; `*out_len` receives N − 1.
//
// # Safety
// `h` is a live handle; arrays hold `cap` doubles; `out_len` is writable.
enum BottcherStatus bottcher_germ1d_series(const struct BottcherGerm1D *h,
                                           uintptr_t terms,
                                           double *out_re,
                                           double *out_im,
                                           uintptr_t cap,
                                           uintptr_t *out_len);

// Evaluator for the chart germ of the family at a stratum, e.g. "1,2,3|4".
//
// # Safety
// `partition` is a NUL-terminated string; `out_handle` is writable.
enum BottcherStatus bottcher_green_new_chart(const char *partition,
                                             struct BottcherGreen **out_handle);

// Evaluator for a polynomial map given as PolyMap JSON.
//
// # Safety
// `json` is a NUL-terminated string; `out_handle` is writable.
enum BottcherStatus bottcher_green_new_json(const char *json, struct BottcherGreen **out_handle);

// # Safety
// `h` is null or a live handle.
void bottcher_green_free(struct BottcherGreen *h);

// Number of complex coordinates; 0 for a null handle.
//
// # Safety
// `h` is null or a live handle.
uintptr_t bottcher_green_dim(const struct BottcherGreen *h);

// G_F(v) = max_j G_j(v); −∞ at points whose orbit reaches the origin.
//
// # Safety
// `h` is a live handle; `re`, `im` hold `n` doubles; `out_g` is writable.
enum BottcherStatus bottcher_green_eval(const struct BottcherGreen *h,
                                        const double *re,
                                        const double *im,
                                        uintptr_t n,
                                        double *out_g);

// Level-`n` coordinate for the chart germ at a stratum.
//
// # Safety
// `partition` is a NUL-terminated string; `out_handle` is writable.
enum BottcherStatus bottcher_coordinate_new_chart(const char *partition,
                                                  uintptr_t n,
                                                  struct BottcherCoordinate **out_handle);

// Level-`n` coordinate for a PolyMap JSON germ.
//
// # Safety
// `json` is a NUL-terminated string; `out_handle` is writable.
enum BottcherStatus bottcher_coordinate_new_json(const char *json,
                                                 uintptr_t n,
                                                 struct BottcherCoordinate **out_handle);

// # Safety
// `h` is null or a live handle.
void bottcher_coordinate_free(struct BottcherCoordinate *h);

// Number of complex coordinates; 0 for a null handle.
//
// # Safety
// `h` is null or a live handle.
uintptr_t bottcher_coordinate_dim(const struct BottcherCoordinate *h);

// Φ_n(v) on the local patch. `re`/`im` in, `out_re`/`out_im` out, all of length `n`.
//
// # Safety
// `h` is a live handle; all arrays hold `n` doubles.
enum BottcherStatus bottcher_coordinate_eval(const struct BottcherCoordinate *h,
                                             const double *re,
                                             const double *im,
                                             uintptr_t n,
                                             double *out_re,
                                             double *out_im);

// Φ(x) anywhere in the basin via the backward flow; `out_discrepancy`
// (may be null) receives the relative gap between two flow times.
//
// # Safety
// `h` is a live handle; all arrays hold `n` doubles.
enum BottcherStatus bottcher_coordinate_extend(const struct BottcherCoordinate *h,
                                               const double *re,
                                               const double *im,
                                               uintptr_t n,
                                               double *out_re,
                                               double *out_im,
                                               double *out_discrepancy);

// Number of fixed points of the family off the diagonals for `m` points.
//
// # Safety
// `out_count` is writable.
enum BottcherStatus bottcher_koch_fixed_point_count(uintptr_t m, uintptr_t *out_count);

// Eigenvalues of the derivative at a fixed point off the diagonals, sorted
// by decreasing real part; `*out_len` receives m − 1.
//
// # Safety
// Arrays hold `cap` doubles; `out_len` is writable.
enum BottcherStatus bottcher_koch_spectrum(uintptr_t m,
                                           double *out_re,
                                           double *out_im,
                                           uintptr_t cap,
                                           uintptr_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOTTCHER_H */
