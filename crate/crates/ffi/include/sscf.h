#ifndef SSCF_H
#define SSCF_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum SscfStatus {
  SSCF_STATUS_OK = 0,
  SSCF_STATUS_NULL_POINTER = 1,
  SSCF_STATUS_VALIDATION = 2,
  SSCF_STATUS_IO = 3,
  SSCF_STATUS_FORMAT = 4,
  SSCF_STATUS_INVARIANT = 5,
  SSCF_STATUS_PANIC = 6,
} SscfStatus;

/**
 * Opaque anchor set handle.
 */
typedef struct SscfAnchors SscfAnchors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *sscf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sscf_version(void);

/**
 * Loads an anchor file. On success `*out` owns a handle to release with
 * [`sscf_anchors_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SscfStatus sscf_anchors_load(const char *path, struct SscfAnchors **out);

/**
 * Releases a handle from [`sscf_anchors_load`]. Null is ignored.
 *
 * # Safety
 * `handle` must come from [`sscf_anchors_load`] and not be freed twice.
 */
void sscf_anchors_free(struct SscfAnchors *handle);

/**
 * Number of strata, or 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live handle.
 */
size_t sscf_anchors_k(const struct SscfAnchors *handle);

/**
 * Writes the template shape `(channels, bins)`.
 *
 * # Safety
 * `handle` must be a live handle; `channels` and `bins` writable.
 */
enum SscfStatus sscf_anchors_shape(const struct SscfAnchors *handle,
                                   size_t *channels,
                                   size_t *bins);

/**
 * Calibrates one series against the nearest `rank`-th anchor, using the
 * spectral settings stored with the anchors. `out` receives
 * `channels * len` doubles; `stratum` (nullable) the matched stratum.
 *
 * # Safety
 * `data` and `out` must each hold `channels * len` doubles and may not overlap.
 */
enum SscfStatus sscf_calibrate(const struct SscfAnchors *handle,
                               const double *data,
                               size_t channels,
                               size_t len,
                               size_t rank,
                               double *out,
                               size_t *stratum);

/**
 * Welch power descriptor with a periodic Hann window. `out` receives
 * `channels * (frame_len / 2 + 1)` doubles.
 *
 * # Safety
 * `data` must hold `channels * len` doubles and `out` the amount above.
 */
enum SscfStatus sscf_welch_psd(const double *data,
                               size_t channels,
                               size_t len,
                               size_t frame_len,
                               size_t hop,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSCF_H */
