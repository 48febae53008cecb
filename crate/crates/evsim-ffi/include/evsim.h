#ifndef EVSIM_H
#define EVSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define EVSIM_OK 0

#define EVSIM_ERR_NULL_POINTER 1

#define EVSIM_ERR_INVALID_ARGUMENT 2

#define EVSIM_ERR_CONTRACT 3

#define EVSIM_ERR_UTF8 4

#define EVSIM_ERR_RUN_FAILED 5

/**
 * Opaque LinUCB learner handle.
 */
typedef struct EvsimLinUcb EvsimLinUcb;

/**
 * Opaque tabular Q-learner handle.
 */
typedef struct EvsimQLearner EvsimQLearner;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a LinUCB learner. `shared_dimension` 0 selects the disjoint
 * model; nonzero the hybrid model. `seed` drives tie breaking.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
int32_t evsim_linucb_new(double alpha,
                         size_t dimension,
                         size_t shared_dimension,
                         size_t arm_count,
                         uint64_t seed,
                         struct EvsimLinUcb **out);

/**
 * # Safety
 * `handle` must come from `evsim_linucb_new` and not be freed twice.
 */
void evsim_linucb_free(struct EvsimLinUcb *handle);

/**
 * Upper-confidence prediction for one arm. `z`/`z_len` are ignored in
 * disjoint mode and required in hybrid mode.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
int32_t evsim_linucb_predict(const struct EvsimLinUcb *handle,
                             size_t arm,
                             const double *x,
                             size_t x_len,
                             const double *z,
                             size_t z_len,
                             double *out);

/**
 * Selects the best arm for a context shared by all arms; ties are broken
 * by the handle's seeded rng.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
int32_t evsim_linucb_select(struct EvsimLinUcb *handle,
                            const double *x,
                            size_t x_len,
                            const double *z,
                            size_t z_len,
                            size_t *out);

/**
 * Feeds an observed reward back into the chosen arm.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
int32_t evsim_linucb_update(struct EvsimLinUcb *handle,
                            size_t arm,
                            const double *x,
                            size_t x_len,
                            const double *z,
                            size_t z_len,
                            double reward);

/**
 * Serializes the learner to its versioned text snapshot.
 *
 * # Safety
 * `out` must be a valid pointer; release the string with
 * `evsim_string_free`.
 */
int32_t evsim_linucb_snapshot(const struct EvsimLinUcb *handle, char **out);

/**
 * Restores a learner from a snapshot produced by
 * `evsim_linucb_snapshot`.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string; `out` a valid slot.
 */
int32_t evsim_linucb_from_snapshot(const char *text, uint64_t seed, struct EvsimLinUcb **out);

/**
 * Creates a tabular Q-learner handle.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
int32_t evsim_qlearner_new(double learning_rate,
                           double discount,
                           double epsilon,
                           double initial_value,
                           uint32_t action_count,
                           uint64_t seed,
                           struct EvsimQLearner **out);

/**
 * # Safety
 * `handle` must come from `evsim_qlearner_new` and not be freed twice.
 */
void evsim_qlearner_free(struct EvsimQLearner *handle);

/**
 * Reads the current action value for a state/action pair.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t evsim_qlearner_get(const struct EvsimQLearner *handle,
                           uint32_t state,
                           uint32_t action,
                           double *out);

/**
 * One Bellman update for an observed transition.
 *
 * # Safety
 * `handle` must be valid.
 */
int32_t evsim_qlearner_update(struct EvsimQLearner *handle,
                              uint32_t state,
                              uint32_t action,
                              double reward,
                              uint32_t next_state);

/**
 * Epsilon-greedy action choice over all actions of the table.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t evsim_qlearner_select(struct EvsimQLearner *handle, uint32_t state, uint32_t *out);

/**
 * Runs a full scenario from its TOML text and returns the metrics as a
 * JSON string.
 *
 * # Safety
 * `config_toml` must be a valid NUL-terminated string; release the
 * output with `evsim_string_free`.
 */
int32_t evsim_run_scenario(const char *config_toml, char **out_metrics_json);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void evsim_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVSIM_H */
