#ifndef DYNALAB_H
#define DYNALAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DynalabStatus {
  DYNALAB_STATUS_OK = 0,
  DYNALAB_STATUS_NULL_POINTER = 1,
  DYNALAB_STATUS_INVALID_ARGUMENT = 2,
  DYNALAB_STATUS_INVALID_STATE = 3,
  DYNALAB_STATUS_INVALID_ACTION = 4,
  DYNALAB_STATUS_EMPTY_BUFFER = 5,
  DYNALAB_STATUS_MODEL_DIRECTION = 6,
  DYNALAB_STATUS_COMPONENT_MISMATCH = 7,
  DYNALAB_STATUS_CONFIG = 8,
  DYNALAB_STATUS_NUMERIC = 9,
  DYNALAB_STATUS_IO = 10,
  DYNALAB_STATUS_PANIC = 11,
} DynalabStatus;

typedef enum DynalabDirection {
  DYNALAB_DIRECTION_FORWARD = 0,
  DYNALAB_DIRECTION_BACKWARD = 1,
} DynalabDirection;

typedef enum DynalabVerdict {
  DYNALAB_VERDICT_STABLE = 0,
  DYNALAB_VERDICT_MARGINAL = 1,
  DYNALAB_VERDICT_DIVERGENT = 2,
} DynalabVerdict;

typedef struct DynalabGrid DynalabGrid;

typedef struct DynalabReplay DynalabReplay;

typedef struct DynalabRng DynalabRng;

typedef struct DynalabTabularModel DynalabTabularModel;

/**
 * Plain-data mirror of one experience tuple.
 */
typedef struct DynalabTransition {
  size_t state;
  size_t action;
  double reward;
  double discount;
  size_t next_state;
} DynalabTransition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on the same thread.
 */
const char *dynalab_last_error(void);

struct DynalabRng *dynalab_rng_new(uint64_t seed);

void dynalab_rng_free(struct DynalabRng *rng);

/**
 * Creates a built-in grid world (`"four_rooms"` or `"dyna_maze"`).
 */
enum DynalabStatus dynalab_grid_new(const char *name,
                                    double slip_probability,
                                    struct DynalabGrid **out);

void dynalab_grid_free(struct DynalabGrid *grid);

/**
 * Number of free cells, or 0 for a null handle.
 */
size_t dynalab_grid_num_states(const struct DynalabGrid *grid);

size_t dynalab_grid_num_actions(const struct DynalabGrid *grid);

enum DynalabStatus dynalab_grid_reset(const struct DynalabGrid *grid,
                                      struct DynalabRng *rng,
                                      size_t *out_state);

enum DynalabStatus dynalab_grid_step(const struct DynalabGrid *grid,
                                     size_t state,
                                     size_t action,
                                     struct DynalabRng *rng,
                                     struct DynalabTransition *out);

/**
 * Creates a replay buffer evicting single transitions; capacity 0 means
 * unbounded.
 */
struct DynalabReplay *dynalab_replay_new(size_t capacity);

void dynalab_replay_free(struct DynalabReplay *replay);

enum DynalabStatus dynalab_replay_append(struct DynalabReplay *replay,
                                         const struct DynalabTransition *t);

size_t dynalab_replay_len(const struct DynalabReplay *replay);

/**
 * Draws one stored transition uniformly at random.
 */
enum DynalabStatus dynalab_replay_sample(const struct DynalabReplay *replay,
                                         struct DynalabRng *rng,
                                         struct DynalabTransition *out);

enum DynalabStatus dynalab_tabular_model_new(enum DynalabDirection direction,
                                             size_t num_states,
                                             size_t num_actions,
                                             struct DynalabTabularModel **out);

void dynalab_tabular_model_free(struct DynalabTabularModel *model);

enum DynalabStatus dynalab_tabular_model_update(struct DynalabTabularModel *model,
                                                const struct DynalabTransition *t);

/**
 * Posterior predictive probability of `next` after `(state, action)`.
 */
enum DynalabStatus dynalab_tabular_model_next_state_probability(const struct DynalabTabularModel *model,
                                                                size_t state,
                                                                size_t action,
                                                                size_t next,
                                                                double *out);

/**
 * Samples `(r, γ, s′)` for `(state, action)` from a forward model.
 */
enum DynalabStatus dynalab_tabular_model_sample_forward(const struct DynalabTabularModel *model,
                                                        size_t state,
                                                        size_t action,
                                                        struct DynalabRng *rng,
                                                        struct DynalabTransition *out);

/**
 * Samples a predecessor pair for the reward, discount and next state of
 * `anchor` from a backward model.
 */
enum DynalabStatus dynalab_tabular_model_sample_backward(const struct DynalabTabularModel *model,
                                                         const struct DynalabTransition *anchor,
                                                         struct DynalabRng *rng,
                                                         struct DynalabTransition *out);

/**
 * Verdict of expected linear TD for the row-major `n × n` key matrix `a`.
 */
enum DynalabStatus dynalab_stability_verdict(const double *a,
                                             size_t n,
                                             double step_size,
                                             enum DynalabVerdict *out);

/**
 * The scalar key matrix of the two-state chain with sampling
 * distribution `(d1, 1 − d1)` and transition probability `p`.
 */
enum DynalabStatus dynalab_two_state_key_value(double d1, double p, double discount, double *out);

/**
 * Iterates `w ← w + α(b − Aw)` from `w0` for at most `steps` steps or until
 * `‖w‖` exceeds `threshold`. Writes the final weights over `w0` and whether
 * the iterate blew up.
 */
enum DynalabStatus dynalab_iterate_expected_td(const double *a,
                                               const double *b,
                                               double *w,
                                               size_t n,
                                               double step_size,
                                               size_t steps,
                                               double threshold,
                                               bool *out_diverged);

/**
 * Runs an experiment given a config file path or built-in name and writes
 * its CSV (and figure) into `out_dir`. A null `out_dir` uses the config's
 * own output directory.
 */
enum DynalabStatus dynalab_run_experiment(const char *config, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNALAB_H */
