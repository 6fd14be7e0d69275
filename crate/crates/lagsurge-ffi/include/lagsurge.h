#ifndef LAGSURGE_H
#define LAGSURGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes shared by every entry point.
typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_INVALID_UTF8 = 2,
  LS_STATUS_SCHEMA = 3,
  LS_STATUS_INVALID_PARAMETER = 4,
  LS_STATUS_INVALID_FRAME = 5,
  LS_STATUS_DEGENERATE_ANGLE = 6,
  LS_STATUS_NON_TRANSVERSE = 7,
  LS_STATUS_OBSTRUCTION = 8,
  LS_STATUS_INVALID_COMPLEX = 9,
  LS_STATUS_BUFFER_TOO_SMALL = 10,
  LS_STATUS_CHECK_FAILED = 11,
  LS_STATUS_OTHER = 99,
} LsStatus;

// Finite cochain complex over a prime field.
typedef struct LsComplex LsComplex;

// Graded exact curve on the cylinder.
typedef struct LsCurve LsCurve;

// Graded Lagrangian plane in ℂⁿ.
typedef struct LsPlane LsPlane;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ls_version(void);

// Copies the last error message of this thread into `buf` (truncated,
// always NUL-terminated) and returns its full length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ls_last_error(char *buf, size_t len);

// Frees a string returned by this library.
//
// # Safety
// `s` must be null or a pointer obtained from this library.
void ls_string_free(char *s);

// The plane ℝⁿ with grading `theta`.
//
// # Safety
// `out` must be a valid pointer.
enum LsStatus ls_plane_real(size_t n, double theta, struct LsPlane **out);

// The plane ℝᵏ × iℝⁿ⁻ᵏ with grading `theta`.
//
// # Safety
// `out` must be a valid pointer.
enum LsStatus ls_plane_conormal(size_t n, size_t k, double theta, struct LsPlane **out);

// A plane in standard ℂⁿ from a unitary frame given column-major as real
// and imaginary parts, graded by `theta`.
//
// # Safety
// `re` and `im` must point to n·n doubles; `out` must be valid.
enum LsStatus ls_plane_from_frame(size_t n,
                                  const double *re,
                                  const double *im,
                                  double theta,
                                  struct LsPlane **out);

// # Safety
// `p` must be null or a handle from this library, freed at most once.
void ls_plane_free(struct LsPlane *p);

// Ind(p0, p1): the raw value and its rounding.
//
// # Safety
// Handles must be valid; `raw` and `rounded` must be valid pointers.
enum LsStatus ls_index(const struct LsPlane *p0,
                       const struct LsPlane *p1,
                       double *raw,
                       int64_t *rounded);

// Builds a curve from a JSON curve spec such as `{"type":"fiber","q":1.0}`.
//
// # Safety
// `spec` must be a NUL-terminated string; `out` must be valid.
enum LsStatus ls_curve_from_json(const char *spec, struct LsCurve **out);

// # Safety
// `c` must be null or a handle from this library, freed at most once.
void ls_curve_free(struct LsCurve *c);

// Floer complex of (c0, c1) as a new complex handle.
//
// # Safety
// Handles must be valid; `out` must be valid.
enum LsStatus ls_floer_complex(const struct LsCurve *c0,
                               const struct LsCurve *c1,
                               struct LsComplex **out);

// Parses a complex from `{"generators":[{"label","deg"}], "d":[[row,col,val]]}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid.
enum LsStatus ls_complex_from_json(const char *json, struct LsComplex **out);

// # Safety
// `c` must be null or a handle from this library, freed at most once.
void ls_complex_free(struct LsComplex *c);

// Writes (degree, rank) pairs of the nonzero cohomology into the arrays,
// `*len` receiving the number of pairs. BufferTooSmall when `cap` is short.
//
// # Safety
// `c` must be valid; `degrees` and `ranks` must hold `cap` entries.
enum LsStatus ls_complex_homology(const struct LsComplex *c,
                                  int64_t *degrees,
                                  size_t *ranks,
                                  size_t cap,
                                  size_t *len);

// Number of generators of the complex.
//
// # Safety
// `c` must be null or a valid handle.
size_t ls_complex_len(const struct LsComplex *c);

// Runs a JSON run config (the format of the regression corpus) and returns
// the canonical JSON report in `*report` (free with `ls_string_free`).
// Returns Ok when every check passes, CheckFailed otherwise, Schema when
// the config is rejected.
//
// # Safety
// `config` must be a NUL-terminated string; `report` must be valid.
enum LsStatus ls_run_config(const char *config, char **report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAGSURGE_H */
