/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef MVRBM_H
#define MVRBM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MvrbmStatus {
  MVRBM_STATUS_OK = 0,
  MVRBM_STATUS_NULL_POINTER = 1,
  MVRBM_STATUS_INVALID_UTF8 = 2,
  MVRBM_STATUS_IO = 3,
  MVRBM_STATUS_PARSE = 4,
  MVRBM_STATUS_VERSION = 5,
  MVRBM_STATUS_SCHEMA = 6,
  MVRBM_STATUS_VALIDATION = 7,
  MVRBM_STATUS_USAGE = 8,
  MVRBM_STATUS_UNSUPPORTED = 9,
  MVRBM_STATUS_BUFFER_TOO_SMALL = 10,
  MVRBM_STATUS_INTERNAL = 11,
} MvrbmStatus;

/**
 * Opaque model handle.
 */
typedef struct MvrbmModel MvrbmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Load a model file. On success `*out` owns a new handle.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum MvrbmStatus mvrbm_model_load(const char *path, struct MvrbmModel **out);

/**
 * Release a handle from [`mvrbm_model_load`]. Null is ignored.
 *
 * # Safety
 * `model` must be null or a live handle not used afterwards.
 */
void mvrbm_model_free(struct MvrbmModel *model);

/**
 * Number of hidden units, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t mvrbm_model_num_hidden(const struct MvrbmModel *model);

/**
 * Hidden posteriors of one record given as a JSON object (the dataset line
 * format). Writes `num_hidden` values to `out`.
 *
 * # Safety
 * `model` must be a live handle, `record_json` a nul-terminated string and
 * `out` valid for `out_len` writes.
 */
enum MvrbmStatus mvrbm_project(const struct MvrbmModel *model,
                               const char *record_json,
                               double *out,
                               size_t out_len);

/**
 * Symmetric KL distance between two posterior vectors of length `len`.
 *
 * # Safety
 * `p` and `q` must be valid for `len` reads and `out` for one write.
 */
enum MvrbmStatus mvrbm_symmetric_kl(const double *p, const double *q, size_t len, double *out);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mvrbm_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVRBM_H */
