#ifndef FRAMEGUIDE_H
#define FRAMEGUIDE_H

/* Generated by cbindgen from crates/ffi. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FgStatus {
  FG_STATUS_OK = 0,
  FG_STATUS_NULL_POINTER = 1,
  FG_STATUS_INVALID_ARGUMENT = 2,
  FG_STATUS_SHAPE_MISMATCH = 3,
  FG_STATUS_DEGENERATE_DIRECTION = 4,
  FG_STATUS_ZERO_VECTOR = 5,
  FG_STATUS_PARSE = 6,
  FG_STATUS_VALIDATION = 7,
  FG_STATUS_CONFIG = 8,
  FG_STATUS_IO = 9,
  FG_STATUS_NUMERIC = 10,
  FG_STATUS_PANIC = 99,
} FgStatus;

typedef enum FgMode {
  FG_MODE_OURS_ANCHORED = 0,
  FG_MODE_NAIVE_ADDITIVE = 1,
  FG_MODE_SINGLE_PROMPT = 2,
  FG_MODE_PROMPT_INTERPOLATION = 3,
} FgMode;

typedef enum FgCondition {
  FG_CONDITION_INITIAL = 0,
  FG_CONDITION_FINAL = 1,
  FG_CONDITION_NEUTRAL = 2,
  FG_CONDITION_NULL = 3,
} FgCondition;

/**
 * Scenario runtime: schedule, analytic denoiser and embedder.
 */
typedef struct FgEngine FgEngine;

typedef struct FgTrajectory FgTrajectory;

/**
 * Sampling parameters. `middle_frame < 0` selects `frames / 2`;
 * `ddpm != 0` selects ancestral sampling and ignores `eta`.
 */
typedef struct FgGuidanceParams {
  double omega;
  size_t tau;
  double alpha_max;
  int64_t middle_frame;
  enum FgMode mode;
  double eta;
  int ddpm;
} FgGuidanceParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *fg_last_error_message(void);

/**
 * Fills `out` with the reference defaults (omega 12, tau 5, alpha_max 1,
 * anchored mode, deterministic DDIM).
 *
 * # Safety
 * `out` must be null or point to writable memory for one `FgGuidanceParams`.
 */
enum FgStatus fg_guidance_params_default(struct FgGuidanceParams *out);

/**
 * Builds an engine for isotropic-per-coordinate Gaussian conditions. Each of
 * the three mean arrays and `var` hold `dim` values; `var` is shared.
 *
 * # Safety
 * Array pointers must reference `dim` readable doubles; `out` must be writable.
 */
enum FgStatus fg_engine_new(size_t frames,
                            size_t dim,
                            size_t steps,
                            const double *mean_initial,
                            const double *mean_final,
                            const double *mean_neutral,
                            const double *var,
                            struct FgEngine **out);

/**
 * Builds an engine from one scenario of a scenario file. A null
 * `scenario_id` picks the first scenario.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` must be writable.
 */
enum FgStatus fg_engine_from_scenario_file(const char *path,
                                           const char *scenario_id,
                                           size_t steps,
                                           struct FgEngine **out);

/**
 * # Safety
 * `engine` must be null or a handle from an `fg_engine_*` constructor that
 * has not been freed.
 */
void fg_engine_free(struct FgEngine *engine);

/**
 * Writes `frames` and `dim` of the engine's scenario.
 *
 * # Safety
 * `engine` must be a live handle; out pointers must be writable.
 */
enum FgStatus fg_engine_shape(const struct FgEngine *engine, size_t *frames, size_t *dim);

/**
 * Evaluates the analytic denoiser on a `frames x dim` row-major latent.
 *
 * # Safety
 * `zt` and `out` must each reference `len` doubles.
 */
enum FgStatus fg_epsilon(const struct FgEngine *engine,
                         const double *zt,
                         size_t len,
                         size_t t,
                         enum FgCondition condition,
                         double *out);

/**
 * Samples one video. The noise seed is used as given.
 *
 * # Safety
 * `engine` and `params` must be valid; `out` must be writable.
 */
enum FgStatus fg_sample(const struct FgEngine *engine,
                        const struct FgGuidanceParams *params,
                        uint64_t seed,
                        struct FgTrajectory **out);

/**
 * Samples like the benchmark harness does, deriving the noise seed from
 * `master_seed`, the scenario id and `seed`.
 *
 * # Safety
 * As for [`fg_sample`].
 */
enum FgStatus fg_sample_cell(const struct FgEngine *engine,
                             const struct FgGuidanceParams *params,
                             uint64_t master_seed,
                             uint64_t seed,
                             struct FgTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a live trajectory handle.
 */
void fg_trajectory_free(struct FgTrajectory *traj);

/**
 * Number of reverse steps `T`; states are indexed `0..=T`.
 *
 * # Safety
 * `traj` must be null or a live trajectory handle.
 */
size_t fg_trajectory_steps(const struct FgTrajectory *traj);

/**
 * Copies the state at step `t` (0 = clean sample) into `buf`, which must
 * hold exactly `frames * dim` doubles.
 *
 * # Safety
 * `buf` must reference `len` writable doubles.
 */
enum FgStatus fg_trajectory_state(const struct FgTrajectory *traj,
                                  size_t t,
                                  double *buf,
                                  size_t len);

/**
 * Transition metrics of the clean sample. `wholistic` is set to NaN and
 * `FG_STATUS_ZERO_VECTOR` returned when the first and last frames embed
 * identically; the frame-wise outputs are still written in that case.
 *
 * # Safety
 * Handles must be live; out pointers must be writable.
 */
enum FgStatus fg_scores(const struct FgEngine *engine,
                        const struct FgTrajectory *traj,
                        double *wholistic,
                        double *framewise,
                        size_t *static_pairs);

/**
 * Cosine similarity of two vectors of length `len`.
 *
 * # Safety
 * `a` and `b` must reference `len` doubles; `out` must be writable.
 */
enum FgStatus fg_directional_similarity(const double *a, const double *b, size_t len, double *out);

/**
 * Runs the benchmark described by a config file and writes reports into
 * `out_dir` (or the config's output when null). `had_cell_errors` is set to
 * 1 when any cell recorded an error.
 *
 * # Safety
 * Strings must be NUL-terminated; `had_cell_errors` must be null or writable.
 */
enum FgStatus fg_run_benchmark(const char *config_path,
                               const char *out_dir,
                               int parallel,
                               int *had_cell_errors);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRAMEGUIDE_H */
