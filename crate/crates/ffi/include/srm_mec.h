#ifndef SRM_MEC_H
#define SRM_MEC_H

/* Generated by cbindgen from the srm-mec-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SrmStatus {
  SRM_STATUS_OK = 0,
  SRM_STATUS_NULL_POINTER = 1,
  SRM_STATUS_INVALID_ARGUMENT = 2,
  SRM_STATUS_CONFIG = 3,
  SRM_STATUS_SOLVE_FAILED = 4,
  SRM_STATUS_OUT_OF_RANGE = 5,
  SRM_STATUS_PANIC = 6,
} SrmStatus;

/**
 * A configured motor: geometry, materials, B-H curve and solver settings.
 */
typedef struct SrmModel SrmModel;

/**
 * Static torque over one rotor pole pitch.
 */
typedef struct SrmTorqueCurve SrmTorqueCurve;

/**
 * Flux solution at one operating point. Fluxes in Wb.
 */
typedef struct SrmFluxResult {
  double mesh[5];
  double yoke;
  double pole;
  double gap;
  double coil_gap;
  double magnet_gap;
  uint32_t iterations;
  double residual;
} SrmFluxResult;

typedef struct SrmMetrics {
  /**
   * N·m/L
   */
  double torque_density;
  /**
   * N·m/A
   */
  double torque_per_ampere;
  /**
   * N·m/L/A
   */
  double torque_density_per_ampere;
} SrmMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *srm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *srm_version(void);

/**
 * Model with the built-in prototype configuration.
 */
enum SrmStatus srm_model_new_default(struct SrmModel **out);

/**
 * Model from a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum SrmStatus srm_model_from_config(const char *path, struct SrmModel **out);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards. NULL is ignored.
 */
void srm_model_free(struct SrmModel *model);

/**
 * Rotor pole pitch and aligned position, degrees.
 *
 * # Safety
 * `model` must be a live handle; the out pointers must be writable.
 */
enum SrmStatus srm_model_angles(const struct SrmModel *model,
                                double *pitch_deg,
                                double *aligned_deg);

/**
 * Saturating solve at `current` A and `angle_deg` from unaligned.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum SrmStatus srm_model_solve(const struct SrmModel *model,
                               double current,
                               double angle_deg,
                               struct SrmFluxResult *out);

/**
 * Torque curve at `current` A using the model's sweep settings.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum SrmStatus srm_model_torque_curve(const struct SrmModel *model,
                                      double current,
                                      struct SrmTorqueCurve **out);

/**
 * Number of samples, or 0 for NULL.
 *
 * # Safety
 * `curve` must be NULL or a live handle.
 */
size_t srm_torque_curve_len(const struct SrmTorqueCurve *curve);

/**
 * Sample `index`: angle in degrees and torque in N·m.
 *
 * # Safety
 * `curve` must be a live handle; the out pointers must be writable.
 */
enum SrmStatus srm_torque_curve_sample(const struct SrmTorqueCurve *curve,
                                       size_t index,
                                       double *angle_deg,
                                       double *torque_nm);

/**
 * Mean of |T| over the period and peak |T|, N·m.
 *
 * # Safety
 * `curve` must be a live handle; the out pointers must be writable.
 */
enum SrmStatus srm_torque_curve_stats(const struct SrmTorqueCurve *curve,
                                      double *mean_nm,
                                      double *peak_nm);

/**
 * # Safety
 * `curve` must come from this library and not be used afterwards. NULL is ignored.
 */
void srm_torque_curve_free(struct SrmTorqueCurve *curve);

/**
 * Figures of merit from volume (mL), phase current (A) and mean torque (N·m).
 *
 * # Safety
 * `out` must be writable.
 */
enum SrmStatus srm_metrics(double volume_ml,
                           double current,
                           double mean_torque,
                           struct SrmMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRM_MEC_H */
