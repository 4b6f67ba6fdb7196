#ifndef QPE_LAB_H
#define QPE_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum QpeStatus {
  QPE_STATUS_OK = 0,
  QPE_STATUS_NULL_POINTER = 1,
  QPE_STATUS_INVALID_ARGUMENT = 2,
  QPE_STATUS_PRECONDITION = 3,
  QPE_STATUS_SEPARATION_GATE = 4,
  QPE_STATUS_NUMERICAL = 5,
  QPE_STATUS_IO = 6,
  QPE_STATUS_BUFFER_TOO_SMALL = 7,
  QPE_STATUS_PANIC = 8,
} QpeStatus;

/**
 * Opaque exact measurement law.
 */
typedef struct QpeDistribution QpeDistribution;

/**
 * Opaque shot histogram.
 */
typedef struct QpeEmpirical QpeEmpirical;

/**
 * Opaque standardized beam eigenproblem.
 */
typedef struct QpeProblem QpeProblem;

/**
 * Opaque sorted eigenphase set.
 */
typedef struct QpeSpectrum QpeSpectrum;

/**
 * Threshold constants for a grid.
 */
typedef struct QpeConstants {
  double tau;
  double sigma;
  double gamma;
  double d_n;
} QpeConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or NULL. Valid until the
 * next call into this library from the same thread.
 */
const char *qpe_last_error(void);

/**
 * Static version string.
 */
const char *qpe_version(void);

/**
 * # Safety
 * `s` must come from this library or be NULL.
 */
void qpe_string_free(char *s);

/**
 * # Safety
 * `phases` must point to `len` doubles; `out` must be writable.
 */
enum QpeStatus qpe_spectrum_new(const double *phases, size_t len, struct QpeSpectrum **out);

/**
 * # Safety
 * `s` must come from [`qpe_spectrum_new`] or be NULL.
 */
void qpe_spectrum_free(struct QpeSpectrum *s);

/**
 * # Safety
 * `s` must be a live handle or NULL.
 */
size_t qpe_spectrum_len(const struct QpeSpectrum *s);

/**
 * Copies the sorted phases into `out` (capacity `cap`).
 *
 * # Safety
 * `out` must have room for `cap` doubles.
 */
enum QpeStatus qpe_spectrum_phases(const struct QpeSpectrum *s, double *out, size_t cap);

/**
 * Cyclic minimum gap (1 for a single phase).
 *
 * # Safety
 * Pointers must be valid.
 */
enum QpeStatus qpe_spectrum_min_gap(const struct QpeSpectrum *s, double *out);

/**
 * Exact law on `2^bits` bins; `weights` may be NULL for uniform weights.
 *
 * # Safety
 * `weights` must point to one double per phase when not NULL.
 */
enum QpeStatus qpe_distribution_new(const struct QpeSpectrum *s,
                                    const double *weights,
                                    uint32_t bits,
                                    struct QpeDistribution **out);

/**
 * # Safety
 * `d` must come from [`qpe_distribution_new`] or be NULL.
 */
void qpe_distribution_free(struct QpeDistribution *d);

/**
 * `p_j` for bin `j`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QpeStatus qpe_distribution_prob(const struct QpeDistribution *d, uint64_t j, double *out);

/**
 * Draws `shots` samples by mixture rejection sampling. `weights` may be
 * NULL for uniform weights.
 *
 * # Safety
 * `weights` must point to one double per phase when not NULL.
 */
enum QpeStatus qpe_sample(const struct QpeSpectrum *s,
                          const double *weights,
                          uint32_t bits,
                          uint64_t shots,
                          uint64_t seed,
                          uint64_t stream,
                          struct QpeEmpirical **out);

/**
 * # Safety
 * `e` must come from this library or be NULL.
 */
void qpe_empirical_free(struct QpeEmpirical *e);

/**
 * # Safety
 * `e` must be a live handle or NULL.
 */
uint64_t qpe_empirical_shots(const struct QpeEmpirical *e);

/**
 * # Safety
 * `e` must be a live handle or NULL.
 */
uint64_t qpe_empirical_count(const struct QpeEmpirical *e, uint64_t j);

/**
 * JSON `{grid, shots, counts: [[j, count], ...]}`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QpeStatus qpe_empirical_to_json(const struct QpeEmpirical *e, char **out);

/**
 * Detected bins for `m0` target modes, sorted. `len_out` receives the set
 * size; fails with `BufferTooSmall` when it exceeds `cap`.
 *
 * # Safety
 * `bins` must have room for `cap` values.
 */
enum QpeStatus qpe_detect(const struct QpeEmpirical *e,
                          size_t m0,
                          uint64_t *bins,
                          size_t cap,
                          size_t *len_out);

/**
 * # Safety
 * `out` must be writable.
 */
enum QpeStatus qpe_constants(uint32_t bits, struct QpeConstants *out);

/**
 * Shot bound for `m0` modes on `2^bits` bins. Pass `epsilon <= 0` for the
 * largest admissible margin; the margin used is written to `epsilon_out`
 * when it is not NULL.
 *
 * # Safety
 * `k_out` must be writable; `epsilon_out` may be NULL.
 */
enum QpeStatus qpe_shot_bound(size_t m0,
                              uint32_t bits,
                              double delta,
                              double epsilon,
                              uint64_t *k_out,
                              double *epsilon_out);

/**
 * Assembles and standardizes a beam. `beam_json` may be NULL for the
 * default 16x6x2 mesh.
 *
 * # Safety
 * `beam_json` must be a NUL-terminated string or NULL.
 */
enum QpeStatus qpe_problem_from_beam(const char *beam_json,
                                     double target_norm,
                                     struct QpeProblem **out);

/**
 * # Safety
 * `p` must come from this library or be NULL.
 */
void qpe_problem_free(struct QpeProblem *p);

/**
 * # Safety
 * `p` must be a live handle or NULL.
 */
size_t qpe_problem_dim(const struct QpeProblem *p);

/**
 * # Safety
 * `p` must be a live handle or NULL.
 */
double qpe_problem_alpha(const struct QpeProblem *p);

/**
 * New spectrum handle holding the problem's phases.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QpeStatus qpe_problem_spectrum(const struct QpeProblem *p, struct QpeSpectrum **out);

/**
 * Shots from the random-basis-state protocol.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QpeStatus qpe_problem_sample(const struct QpeProblem *p,
                                  uint32_t bits,
                                  uint64_t shots,
                                  uint64_t seed,
                                  struct QpeEmpirical **out);

/**
 * Runs an experiment described by JSON and returns the report as JSON.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `report_out` must be writable.
 */
enum QpeStatus qpe_run_experiment(const char *config_json, char **report_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QPE_LAB_H */
