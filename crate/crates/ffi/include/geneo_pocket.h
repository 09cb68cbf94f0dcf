#ifndef GENEO_POCKET_H
#define GENEO_POCKET_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum GpStatus {
  GP_STATUS_OK = 0,
  GP_STATUS_NULL_POINTER = 1,
  GP_STATUS_INVALID_UTF8 = 2,
  GP_STATUS_PARSE = 3,
  GP_STATUS_DOMAIN = 4,
  GP_STATUS_NUMERICAL = 5,
  GP_STATUS_IO = 6,
  /**
   * A Rust panic was caught at the boundary; the library state is intact.
   */
  GP_STATUS_PANIC = 7,
} GpStatus;

/**
 * Learnable detector parameters.
 */
typedef struct GpParams GpParams;

/**
 * Ranked pockets of one structure.
 */
typedef struct GpPrediction GpPrediction;

/**
 * A protein structure.
 */
typedef struct GpStructure GpStructure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gp_version(void);

/**
 * Message of the last failed call on this thread, or NULL if none.
 * Valid until the next failing call on the same thread.
 */
const char *gp_last_error(void);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void gp_string_free(char *s);

/**
 * The published optimum parameters.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GpStatus gp_params_table1(struct GpParams **out);

/**
 * Parameters from the `key = value` parameter file format.
 *
 * # Safety
 * `source` must be NUL-terminated; `out` must be a valid pointer.
 */
enum GpStatus gp_params_parse(const char *source, struct GpParams **out);

/**
 * Parameters from raw values; `sigma` and `alpha` point to 8 doubles each.
 *
 * # Safety
 * Array pointers must reference 8 readable doubles; `out` must be valid.
 */
enum GpStatus gp_params_new(const double *sigma,
                            const double *alpha,
                            double theta,
                            struct GpParams **out);

/**
 * Serialize parameters to the parameter file format.
 *
 * # Safety
 * `params` must be a live handle; `out` a valid pointer. Free the result with
 * [`gp_string_free`].
 */
enum GpStatus gp_params_to_string(const struct GpParams *params, char **out);

/**
 * # Safety
 * `params` must be NULL or a live handle.
 */
void gp_params_free(struct GpParams *params);

/**
 * Parse a structure. `format` 0 reads the native complex format, 1 reads PDB.
 * Ligand records are ignored.
 *
 * # Safety
 * `source` must be NUL-terminated; `out` must be a valid pointer.
 */
enum GpStatus gp_structure_parse(const char *source, uint32_t format, struct GpStructure **out);

/**
 * Structure from element symbols and `3 * n` coordinates in Å; charges are zero.
 *
 * # Safety
 * `elements` must hold `n` NUL-terminated strings and `xyz` `3 * n` doubles.
 */
enum GpStatus gp_structure_from_atoms(const char *const *elements,
                                      const double *xyz,
                                      size_t n,
                                      struct GpStructure **out);

/**
 * # Safety
 * `structure` must be NULL or a live handle.
 */
void gp_structure_free(struct GpStructure *structure);

/**
 * Run the detector with default grid and potentials and 6-connectivity.
 *
 * # Safety
 * Handles must be live; `out` must be a valid pointer.
 */
enum GpStatus gp_predict(const struct GpParams *params,
                         const struct GpStructure *structure,
                         struct GpPrediction **out);

/**
 * Number of pockets, 0 for a NULL handle.
 *
 * # Safety
 * `pred` must be NULL or a live handle.
 */
size_t gp_prediction_pocket_count(const struct GpPrediction *pred);

/**
 * Grid origin (Å, 3 doubles), spacing and dimensions (3 values).
 *
 * # Safety
 * `pred` must be live; outputs must be NULL or writable.
 */
enum GpStatus gp_prediction_grid(const struct GpPrediction *pred,
                                 double *origin,
                                 double *spacing,
                                 size_t *dims);

/**
 * Score and voxel count of the pocket of 1-based `rank`.
 *
 * # Safety
 * `pred` must be live; outputs must be NULL or writable.
 */
enum GpStatus gp_prediction_pocket(const struct GpPrediction *pred,
                                   size_t rank,
                                   double *score,
                                   size_t *voxel_count);

/**
 * Copy up to `capacity` voxel indices `(i, j, k)` of a pocket into `out`
 * (`3 * capacity` values) and store the total count in `written`.
 *
 * # Safety
 * `pred` must be live; `out` must hold `3 * capacity` values.
 */
enum GpStatus gp_prediction_pocket_voxels(const struct GpPrediction *pred,
                                          size_t rank,
                                          size_t *out,
                                          size_t capacity,
                                          size_t *written);

/**
 * The whole prediction as JSON. Free with [`gp_string_free`].
 *
 * # Safety
 * `pred` must be live; `out` must be a valid pointer.
 */
enum GpStatus gp_prediction_to_json(const struct GpPrediction *pred, char **out);

/**
 * # Safety
 * `pred` must be NULL or a live handle.
 */
void gp_prediction_free(struct GpPrediction *pred);

/**
 * Wald interval for a proportion `p_hat` out of `n` at `confidence`.
 *
 * # Safety
 * Outputs must be NULL or writable.
 */
enum GpStatus gp_wald(double p_hat,
                      size_t n,
                      double confidence,
                      double *se,
                      double *ci_low,
                      double *ci_high);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GENEO_POCKET_H */
