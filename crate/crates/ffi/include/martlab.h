/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef MARTLAB_H
#define MARTLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MlStatus {
  ML_STATUS_OK = 0,
  ML_STATUS_NULL_POINTER = 1,
  ML_STATUS_VALIDATION = 2,
  ML_STATUS_CAPACITY = 3,
  ML_STATUS_PARAMETER = 4,
  ML_STATUS_DEGENERATE_WEIGHT = 5,
  ML_STATUS_DEGENERATE_INPUT = 6,
  ML_STATUS_EMPTY_ESTIMATE = 7,
  ML_STATUS_UNKNOWN_SUITE = 8,
  ML_STATUS_SCHEMA = 9,
  ML_STATUS_IO = 10,
  ML_STATUS_INVALID_UTF8 = 11,
  ML_STATUS_PANIC = 12,
} MlStatus;

// Opaque adapted family (one value per block of every level).
typedef struct MlFamily MlFamily;

// Opaque filtered space.
typedef struct MlSpace MlSpace;

// A constant and the block attaining it; `witness_level` and
// `witness_block` are -1 when there is no witness.
typedef struct MlConstant {
  double value;
  int64_t witness_level;
  int64_t witness_block;
} MlConstant;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after success.
// The pointer stays valid until the next call on this thread.
const char *ml_last_error_message(void);

// Uniform dyadic space of the given depth.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum MlStatus ml_space_dyadic(size_t depth, struct MlSpace **out_space);

// Space from `{"masses": [...], "partitions": [[...], ...]}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out_space` valid for writing.
enum MlStatus ml_space_from_json(const char *json, struct MlSpace **out_space);

// # Safety
// `space` must be null or a handle from this library, not yet freed.
void ml_space_free(struct MlSpace *space);

// # Safety
// `space` must be a live handle.
size_t ml_space_num_atoms(const struct MlSpace *space);

// # Safety
// `space` must be a live handle.
size_t ml_space_num_levels(const struct MlSpace *space);

// # Safety
// `space` must be a live handle.
size_t ml_space_num_blocks(const struct MlSpace *space, size_t level);

// Family from block values concatenated level by level
// (`num_blocks(0) + ... + num_blocks(L)` values in total).
//
// # Safety
// `values` must point to `len` readable doubles; `space` must be live and
// `out_family` valid for writing.
enum MlStatus ml_family_new(const struct MlSpace *space,
                            const double *values,
                            size_t len,
                            struct MlFamily **out_family);

// The family equal to 1 on every block.
//
// # Safety
// `space` must be live and `out_family` valid for writing.
enum MlStatus ml_family_ones(const struct MlSpace *space, struct MlFamily **out_family);

// # Safety
// `family` must be null or a handle from this library, not yet freed.
void ml_family_free(struct MlFamily *family);

// `out = E_level f`; both buffers hold one value per atom.
//
// # Safety
// `f` and `out_values` must point to `n` doubles.
enum MlStatus ml_cond_exp(const struct MlSpace *space,
                          size_t level,
                          const double *f,
                          size_t n,
                          double *out_values);

// `out = sup_i |E_i f|`.
//
// # Safety
// `f` and `out_values` must point to `n` doubles.
enum MlStatus ml_doob_max(const struct MlSpace *space,
                          const double *f,
                          size_t n,
                          double *out_values);

// `[w]_{A_p}`.
//
// # Safety
// `w` must point to `n` doubles and `out_constant` be valid for writing.
enum MlStatus ml_ap_constant(const struct MlSpace *space,
                             const double *w,
                             size_t n,
                             double p,
                             struct MlConstant *out_constant);

// `[w]_{A_inf}`.
//
// # Safety
// `w` must point to `n` doubles and `out_constant` be valid for writing.
enum MlStatus ml_ainfty_constant(const struct MlSpace *space,
                                 const double *w,
                                 size_t n,
                                 struct MlConstant *out_constant);

// Carleson constant of the block masses `nu` with exponent `theta`.
//
// # Safety
// Handles must be live and `out_constant` valid for writing.
enum MlStatus ml_carleson_constant(const struct MlSpace *space,
                                   const struct MlFamily *nu,
                                   double theta,
                                   struct MlConstant *out_constant);

// Testing constant of `M_alpha: L^p(sigma^{1-p}) -> L^q(u)`.
//
// # Safety
// `u` and `sigma` must point to `n` doubles; handles must be live.
enum MlStatus ml_sawyer_max_constant(const struct MlSpace *space,
                                     const struct MlFamily *alpha,
                                     const double *u,
                                     const double *sigma,
                                     size_t n,
                                     double p,
                                     double q,
                                     struct MlConstant *out_constant);

// `||W_alpha[w]^{1/p'}||_{L^r(w)}` with `1/r = 1/q - 1/p`.
//
// # Safety
// `w` must point to `n` doubles; handles must be live.
enum MlStatus ml_wolff_norm(const struct MlSpace *space,
                            const struct MlFamily *alpha,
                            const double *w,
                            size_t n,
                            double p,
                            double q,
                            double *out_value);

// Runs a suite with default generators on all cores and returns its JSON
// result in `*out_json`; free it with [`ml_string_free`]. The status is
// `Ok` even when assertions fail; inspect the `passed` field.
//
// # Safety
// `suite` must be a NUL-terminated string and `out_json` valid for writing.
enum MlStatus ml_run_suite_json(const char *suite, uint64_t trials, uint64_t seed, char **out_json);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void ml_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARTLAB_H */
