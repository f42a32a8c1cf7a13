#ifndef MERGE_SIM_H
#define MERGE_SIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_ARGUMENT = 2,
  MS_STATUS_INVALID_UTF8 = 3,
  MS_STATUS_CONFIG = 4,
  MS_STATUS_SCENARIO = 5,
  MS_STATUS_SIMULATION = 6,
  MS_STATUS_NOT_FOUND = 7,
  MS_STATUS_PANIC = 99,
} MsStatus;

typedef enum MsAction {
  MS_ACTION_LEFT = 0,
  MS_ACTION_STRAIGHT = 1,
} MsAction;

typedef struct MsConfig MsConfig;

typedef struct MsOutcome MsOutcome;

typedef struct MsScenario MsScenario;

/**
 * Vehicle footprint in the road frame: lateral and longitudinal center (m),
 * heading from the road axis (rad) and half extents (m).
 */
typedef struct MsRect {
  double x_lat;
  double y_long;
  double heading;
  double half_width;
  double half_length;
} MsRect;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ms_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void ms_string_free(char *s);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum MsStatus ms_config_default(struct MsConfig **out);

/**
 * Parses a TOML configuration; absent keys take their defaults.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum MsStatus ms_config_from_toml(const char *toml, struct MsConfig **out);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum MsStatus ms_config_set_seed(struct MsConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be null or a handle not yet freed.
 */
void ms_config_free(struct MsConfig *config);

/**
 * Loads `"scenario1"` or `"scenario2"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum MsStatus ms_scenario_builtin(const char *name, struct MsScenario **out);

/**
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum MsStatus ms_scenario_from_toml(const char *toml, struct MsScenario **out);

/**
 * Sets the aggressiveness of a decision vehicle, addressed by name or id.
 *
 * # Safety
 * `scenario` must be a live handle; `key` a NUL-terminated string.
 */
enum MsStatus ms_scenario_set_q(struct MsScenario *scenario, const char *key, double q);

/**
 * # Safety
 * `scenario` must be null or a handle not yet freed.
 */
void ms_scenario_free(struct MsScenario *scenario);

/**
 * Simulates `scenario` to completion. A collision is a normal outcome, not
 * an error; query it with [`ms_outcome_collided`].
 *
 * # Safety
 * `scenario` and `config` must be live handles; `out` must be writable.
 */
enum MsStatus ms_run(const struct MsScenario *scenario,
                     const struct MsConfig *config,
                     struct MsOutcome **out);

/**
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_outcome_collided(const struct MsOutcome *outcome, bool *out);

/**
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_outcome_forced_stop(const struct MsOutcome *outcome, bool *out);

/**
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_outcome_end_time(const struct MsOutcome *outcome, double *out);

/**
 * Time vehicle `id` entered the mainline; [`MsStatus::NotFound`] if it never
 * merged.
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_outcome_merge_time(const struct MsOutcome *outcome, uint32_t id, double *out);

/**
 * The trajectory log as CSV; free the result with [`ms_string_free`].
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_outcome_trajectory_csv(const struct MsOutcome *outcome, char **out);

/**
 * # Safety
 * `outcome` must be null or a handle not yet freed.
 */
void ms_outcome_free(struct MsOutcome *outcome);

/**
 * Solves a 2×2 leader/follower game. Payoffs are row-major with rows the
 * leader's move and columns the follower's, each ordered (Left, Straight).
 *
 * # Safety
 * `leader` and `follower` must each point to 4 doubles; outputs must be
 * writable.
 */
enum MsStatus ms_solve_stackelberg(const double *leader,
                                   const double *follower,
                                   enum MsAction *out_leader,
                                   enum MsAction *out_follower);

/**
 * Collision-possibility index of two footprints, in [0, 1].
 *
 * # Safety
 * All pointers must be valid.
 */
enum MsStatus ms_collision_index(const struct MsRect *a, const struct MsRect *b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MERGE_SIM_H */
