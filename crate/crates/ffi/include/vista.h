#ifndef VISTA_H
#define VISTA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VistaStatus {
  VISTA_STATUS_OK = 0,
  VISTA_STATUS_NULL_ARGUMENT = 1,
  VISTA_STATUS_INVALID_UTF8 = 2,
  VISTA_STATUS_IO = 3,
  VISTA_STATUS_INVALID_INPUT = 4,
  VISTA_STATUS_INVALID_PARAMETER = 5,
  VISTA_STATUS_SNAPSHOT = 6,
  VISTA_STATUS_UNKNOWN_NODE = 7,
  VISTA_STATUS_MISSING_OUTCOME = 8,
  VISTA_STATUS_ORACLE = 9,
  VISTA_STATUS_INTERNAL = 10,
  VISTA_STATUS_PANIC = 11,
} VistaStatus;

typedef struct VistaDataset VistaDataset;

typedef struct VistaKg VistaKg;

typedef struct VistaMasks VistaMasks;

typedef struct VistaOutcomes VistaOutcomes;

typedef struct VistaMetrics {
  double mae_lat;
  double mae_lon;
  double rmse_lat;
  double rmse_lon;
  /**
   * Mean haversine distance in kilometres.
   */
  double mhd;
  size_t n;
} VistaMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *vista_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vista_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void vista_string_free(char *s);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VistaStatus vista_dataset_read_csv(const char *path, struct VistaDataset **out);

/**
 * # Safety
 * `dataset` must be null or a handle from this library, not yet freed.
 */
void vista_dataset_free(struct VistaDataset *dataset);

/**
 * # Safety
 * Pointers must be valid; `dataset` must be a live handle.
 */
enum VistaStatus vista_dataset_counts(const struct VistaDataset *dataset,
                                      size_t *vessels,
                                      size_t *records);

/**
 * Removes whole segments of `m` records with probability `removal_prob`.
 *
 * # Safety
 * Pointers must be valid; `dataset` must be a live handle.
 */
enum VistaStatus vista_dataset_mask(const struct VistaDataset *dataset,
                                    size_t m,
                                    double removal_prob,
                                    uint64_t seed,
                                    struct VistaDataset **out_masked,
                                    struct VistaMasks **out_masks);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VistaStatus vista_masks_read(const char *path, struct VistaMasks **out);

/**
 * # Safety
 * `masks` must be a live handle and `path` a NUL-terminated string.
 */
enum VistaStatus vista_masks_write(const struct VistaMasks *masks, const char *path);

/**
 * Number of masked segments.
 *
 * # Safety
 * `masks` must be a live handle and `out` a valid pointer.
 */
enum VistaStatus vista_masks_gap_count(const struct VistaMasks *masks, size_t *out);

/**
 * # Safety
 * `masks` must be null or a handle from this library, not yet freed.
 */
void vista_masks_free(struct VistaMasks *masks);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum VistaStatus vista_kg_new(struct VistaKg **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VistaStatus vista_kg_load(const char *path, struct VistaKg **out);

/**
 * # Safety
 * `kg` must be a live handle and `path` a NUL-terminated string.
 */
enum VistaStatus vista_kg_save(const struct VistaKg *kg, const char *path);

/**
 * # Safety
 * `kg` must be null or a handle from this library, not yet freed.
 */
void vista_kg_free(struct VistaKg *kg);

/**
 * # Safety
 * Pointers must be valid; `kg` must be a live handle.
 */
enum VistaStatus vista_kg_counts(const struct VistaKg *kg, size_t *nodes, size_t *edges);

/**
 * Distills every complete segment of `dataset` into `kg`. Segments that
 * fail permanently are skipped; their number goes to `quarantined`, which
 * may be null.
 *
 * # Safety
 * `kg` and `dataset` must be live handles.
 */
enum VistaStatus vista_kg_build(struct VistaKg *kg,
                                const struct VistaDataset *dataset,
                                size_t batch_size,
                                size_t m,
                                uint64_t seed,
                                size_t *quarantined);

/**
 * DOT text of the subgraph induced by `nodes`, a comma-separated list of
 * DOT names or numeric ids.
 *
 * # Safety
 * `kg` must be a live handle, `nodes` a NUL-terminated string and `out` a
 * valid pointer.
 */
enum VistaStatus vista_kg_export_dot(const struct VistaKg *kg, const char *nodes, char **out);

/**
 * Imputes every masked segment of `masked`.
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum VistaStatus vista_impute(const struct VistaKg *kg,
                              const struct VistaDataset *masked,
                              const struct VistaMasks *masks,
                              size_t batch_size,
                              uint64_t seed,
                              struct VistaOutcomes **out);

/**
 * # Safety
 * `outcomes` must be a live handle and `out` a valid pointer.
 */
enum VistaStatus vista_outcomes_count(const struct VistaOutcomes *outcomes, size_t *out);

/**
 * Outcomes as JSON lines.
 *
 * # Safety
 * `outcomes` must be a live handle and `out` a valid pointer.
 */
enum VistaStatus vista_outcomes_to_jsonl(const struct VistaOutcomes *outcomes, char **out);

/**
 * # Safety
 * `outcomes` must be null or a handle from this library, not yet freed.
 */
void vista_outcomes_free(struct VistaOutcomes *outcomes);

/**
 * Scores `outcomes` against `truth` over the masked records.
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum VistaStatus vista_evaluate(const struct VistaDataset *truth,
                                const struct VistaOutcomes *outcomes,
                                const struct VistaMasks *masks,
                                struct VistaMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VISTA_H */
