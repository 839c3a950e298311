/* SPDX-License-Identifier: Apache-2.0 */

#ifndef SWITCHSYNTH_H
#define SWITCHSYNTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_UTF8 = 2,
  /**
   * Schema or value error in a config, artifact or schedule.
   */
  SS_STATUS_CONFIG = 3,
  SS_STATUS_PARSE = 4,
  SS_STATUS_IO = 5,
  SS_STATUS_DIMENSION = 6,
  SS_STATUS_MODEL = 7,
  /**
   * Synthesis could not produce a controller.
   */
  SS_STATUS_SYNTHESIS = 8,
  /**
   * The state left the controlled domain or hit a missing table entry.
   */
  SS_STATUS_DOMAIN = 9,
  /**
   * An output buffer is too small.
   */
  SS_STATUS_BUFFER_TOO_SMALL = 10,
  SS_STATUS_INDEX_OUT_OF_RANGE = 11,
  SS_STATUS_PANIC = 99,
} SsStatus;

/**
 * A synthesized controller together with its system.
 */
typedef struct SsArtifact SsArtifact;

/**
 * A simulated closed-loop trajectory.
 */
typedef struct SsTrajectory SsTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ss_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ss_version(void);

/**
 * Reads a config file and runs the synthesis it describes.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SsStatus ss_artifact_synthesize(const char *config_path, struct SsArtifact **out);

/**
 * Loads an artifact file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SsStatus ss_artifact_load(const char *path, struct SsArtifact **out);

/**
 * Writes an artifact file.
 *
 * # Safety
 * `art` must come from this library and `path` be NUL-terminated.
 */
enum SsStatus ss_artifact_save(const struct SsArtifact *art, const char *path);

/**
 * Releases an artifact. Null is ignored.
 *
 * # Safety
 * `art` must come from this library and not be used afterwards.
 */
void ss_artifact_free(struct SsArtifact *art);

/**
 * Re-checks every certificate. Writes the number of checks and of
 * failures; returns `Ok` even when some checks fail.
 *
 * # Safety
 * `art` must come from this library; the out pointers must be valid.
 */
enum SsStatus ss_artifact_verify(const struct SsArtifact *art, size_t *checks, size_t *failures);

/**
 * State dimension, or 0 for null.
 *
 * # Safety
 * `art` must be null or come from this library.
 */
size_t ss_artifact_dim(const struct SsArtifact *art);

/**
 * Number of capture rings (the stability ring is not counted), or 0 for null.
 *
 * # Safety
 * `art` must be null or come from this library.
 */
size_t ss_artifact_ring_count(const struct SsArtifact *art);

/**
 * Sum of the ring extensions, or NaN for null.
 *
 * # Safety
 * `art` must be null or come from this library.
 */
double ss_artifact_total_extension(const struct SsArtifact *art);

/**
 * Copies the per-ring extensions, innermost first, into `out[0..len]`.
 *
 * # Safety
 * `art` must come from this library and `out` hold `len` doubles.
 */
enum SsStatus ss_artifact_extensions(const struct SsArtifact *art, double *out, size_t len);

/**
 * Bounds of the capture set `S` into `lo[0..len]` and `hi[0..len]`.
 *
 * # Safety
 * `art` must come from this library and both buffers hold `len` doubles.
 */
enum SsStatus ss_artifact_outer_box(const struct SsArtifact *art,
                                    double *lo,
                                    double *hi,
                                    size_t len);

/**
 * Simulates the closed loop from `x0[0..dim]` for `steps` steps.
 * `schedule_path` may be null (no perturbation).
 *
 * # Safety
 * `art` must come from this library, `x0` hold `dim` doubles,
 * `schedule_path` be null or NUL-terminated and `out` valid.
 */
enum SsStatus ss_simulate(const struct SsArtifact *art,
                          const double *x0,
                          size_t dim,
                          size_t steps,
                          const char *schedule_path,
                          struct SsTrajectory **out);

/**
 * Releases a trajectory. Null is ignored.
 *
 * # Safety
 * `traj` must come from this library and not be used afterwards.
 */
void ss_trajectory_free(struct SsTrajectory *traj);

/**
 * Number of recorded states (steps + 1 unless the run escaped), or 0 for null.
 *
 * # Safety
 * `traj` must be null or come from this library.
 */
size_t ss_trajectory_len(const struct SsTrajectory *traj);

/**
 * Step at which the state escaped the controlled domain, or -1 if the
 * run completed (or `traj` is null).
 *
 * # Safety
 * `traj` must be null or come from this library.
 */
int64_t ss_trajectory_escape_step(const struct SsTrajectory *traj);

/**
 * Copies state `index` into `out[0..len]` and, if `ring` is non-null,
 * the ring in charge at that step (0 = stability ring).
 *
 * # Safety
 * `traj` must come from this library, `out` hold `len` doubles and
 * `ring` be null or valid.
 */
enum SsStatus ss_trajectory_state(const struct SsTrajectory *traj,
                                  size_t index,
                                  double *out,
                                  size_t len,
                                  size_t *ring);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWITCHSYNTH_H */
