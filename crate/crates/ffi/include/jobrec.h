#ifndef JOBREC_H
#define JOBREC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum JrStatus {
  JR_STATUS_OK = 0,
  JR_STATUS_NULL_ARGUMENT = 1,
  JR_STATUS_INVALID_UTF8 = 2,
  JR_STATUS_IO = 3,
  JR_STATUS_DATA = 4,
  JR_STATUS_NOT_FOUND = 5,
  JR_STATUS_NO_MODEL = 6,
  JR_STATUS_INVALID_ARGUMENT = 7,
  JR_STATUS_PANIC = 8,
} JrStatus;

/**
 * Loaded data, featurizer, optional model and starvation counters.
 */
typedef struct JrEngine JrEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *jr_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void jr_string_free(char *s);

/**
 * Loads a data directory and featurizer, plus a model when `model_path` is
 * not null. `seed` drives slate composition.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out_engine` must be
 * writable.
 */
enum JrStatus jr_engine_open(const char *data_dir,
                             const char *featurizer_path,
                             const char *model_path,
                             uint64_t seed,
                             struct JrEngine **out_engine);

/**
 * # Safety
 * `engine` must be null or come from [`jr_engine_open`] and not have been freed.
 */
void jr_engine_free(struct JrEngine *engine);

/**
 * Number of candidates, jobs and interactions loaded.
 *
 * # Safety
 * Pointers must be valid.
 */
enum JrStatus jr_engine_counts(const struct JrEngine *engine,
                               size_t *candidates,
                               size_t *jobs,
                               size_t *interactions);

/**
 * Composes one slate and writes it as JSON to `out_json` (free with
 * [`jr_string_free`]). `top` of 0 means no cap. `now` is the composition
 * time in Unix seconds. Starvation counters persist inside the engine.
 *
 * # Safety
 * Pointers must be valid; `candidate_id` NUL-terminated.
 */
enum JrStatus jr_engine_recommend(struct JrEngine *engine,
                                  const char *candidate_id,
                                  size_t top,
                                  int64_t now,
                                  char **out_json);

/**
 * Model probability that the candidate clicks the job next.
 *
 * # Safety
 * Pointers must be valid; ids NUL-terminated.
 */
enum JrStatus jr_engine_predict(const struct JrEngine *engine,
                                const char *candidate_id,
                                const char *job_id,
                                double *out_probability);

/**
 * Cosine similarity of two vectors of length `len`.
 *
 * # Safety
 * `a` and `b` must point to `len` readable doubles.
 */
enum JrStatus jr_cosine(const double *a, const double *b, size_t len, double *out_similarity);

/**
 * Pearson chi-square for two click-through proportions, with the verdict at
 * the 0.01 level.
 *
 * # Safety
 * Output pointers must be valid.
 */
enum JrStatus jr_chi_square_two_proportions(uint64_t clicks_a,
                                            uint64_t impressions_a,
                                            uint64_t clicks_b,
                                            uint64_t impressions_b,
                                            double *out_statistic,
                                            bool *out_significant);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JOBREC_H */
