#ifndef FK_LAB_H
#define FK_LAB_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

enum FkStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  FK_STATUS_OK = 0,
  FK_STATUS_NULL_POINTER = 1,
  FK_STATUS_INVALID_ARGUMENT = 2,
  FK_STATUS_UNSUPPORTED = 3,
  FK_STATUS_UNDECIDABLE = 4,
  FK_STATUS_BUDGET = 5,
  FK_STATUS_IO = 6,
  FK_STATUS_PARSE = 7,
  FK_STATUS_BUFFER_TOO_SMALL = 8,
  FK_STATUS_NOT_FOUND = 9,
  FK_STATUS_PANIC = 10,
};
#ifndef __cplusplus
typedef int32_t FkStatus;
#endif // __cplusplus

typedef struct FkBump FkBump;

typedef struct FkConfig FkConfig;

typedef struct FkFamily FkFamily;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len`). Returns the full message length, 0 when there is none.
 */
size_t fk_last_error(char *buf, size_t len);

/**
 * Built-in family `fk_nn` or `fk_nnn` with kick strength `lambda`.
 */
FkStatus fk_family_new(const char *name, double lambda, struct FkFamily **out);

void fk_family_free(struct FkFamily *f);

/**
 * New family S_j + φ(x_j); the inputs stay owned by the caller.
 */
FkStatus fk_family_perturb(const struct FkFamily *f, const struct FkBump *b, struct FkFamily **out);

/**
 * Lowest-action Birkhoff (p,q)-minimizer over `n_starts` seeded starts.
 */
FkStatus fk_minimize(const struct FkFamily *f,
                     size_t p,
                     int64_t q,
                     size_t n_starts,
                     uint64_t seed,
                     struct FkConfig **out);

/**
 * Configuration in X_{p,q} from p values x_1..x_p.
 */
FkStatus fk_config_new(const double *values, size_t p, int64_t q, struct FkConfig **out);

void fk_config_free(struct FkConfig *x);

FkStatus fk_config_period(const struct FkConfig *x, size_t *p, int64_t *q);

/**
 * Copies x_1..x_p into `buf`, which must hold p values.
 */
FkStatus fk_config_values(const struct FkConfig *x, double *buf, size_t len);

FkStatus fk_periodic_action(const struct FkFamily *f, const struct FkConfig *x, double *out);

/**
 * Largest gap (lo, hi) of the extended orbit; hi may exceed 1 for the
 * gap that wraps around.
 */
FkStatus fk_config_max_gap(const struct FkConfig *x, double *lo, double *hi);

/**
 * Bump of size ε supported on (ξ₋, ξ₊) mod 1.
 */
FkStatus fk_bump_new(double xi_minus, double xi_plus, double eps, uint32_t k, struct FkBump **out);

void fk_bump_free(struct FkBump *b);

/**
 * n-th derivative of φ at ξ.
 */
FkStatus fk_bump_eval(const struct FkBump *b, double xi, uint32_t n, double *out);

FkStatus fk_bump_plateau_value(const struct FkBump *b, double *out);

/**
 * The certified bump constant C_k.
 */
FkStatus fk_bump_constant(uint32_t k, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FK_LAB_H */
