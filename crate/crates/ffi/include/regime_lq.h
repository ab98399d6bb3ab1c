#ifndef REGIME_LQ_H
#define REGIME_LQ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlqStatus {
  RLQ_STATUS_OK = 0,
  RLQ_STATUS_NULL_POINTER = 1,
  RLQ_STATUS_INVALID_ARGUMENT = 2,
  RLQ_STATUS_VALIDATION = 3,
  RLQ_STATUS_SOLVER = 4,
  RLQ_STATUS_VERIFICATION = 5,
  RLQ_STATUS_PANIC = 6,
} RlqStatus;

typedef enum RlqVariant {
  RLQ_VARIANT_FULL = 0,
  RLQ_VARIANT_TRUNCATED = 1,
  RLQ_VARIANT_UPPER_BOUND = 2,
  RLQ_VARIANT_LOWER_BOUND = 3,
} RlqVariant;

/**
 * Opaque feedback law handle.
 */
typedef struct RlqLaw RlqLaw;

/**
 * Opaque model handle.
 */
typedef struct RlqModel RlqModel;

/**
 * Opaque Riccati solution handle.
 */
typedef struct RlqSolution RlqSolution;

/**
 * Inputs of [`rlq_verify`].
 */
typedef struct RlqVerifyOptions {
  size_t grid_n;
  size_t grid_sim;
  uint64_t n_paths;
  uint64_t seed;
  double x;
  size_t regime;
  size_t n_adversaries;
  /**
   * 0 uses every available core.
   */
  size_t workers;
} RlqVerifyOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *rlq_last_error(void);

/**
 * Parses a model from a JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum RlqStatus rlq_model_from_json(const char *json, struct RlqModel **out);

/**
 * Loads a model from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RlqStatus rlq_model_from_file(const char *path, struct RlqModel **out);

/**
 * # Safety
 * `model` must come from `rlq_model_from_*` and not be used afterwards.
 */
void rlq_model_free(struct RlqModel *model);

/**
 * Number of regimes and the control dimensions `m1`, `m2`.
 *
 * # Safety
 * Pointers must be valid; output pointers may be null.
 */
enum RlqStatus rlq_model_dims(const struct RlqModel *model,
                              size_t *n_regimes,
                              size_t *m1,
                              size_t *m2,
                              size_t *n_atoms);

/**
 * Checks the model against a case (`"standard"`, `"I"`, `"II"`, `"III"`) and margin `delta`.
 *
 * # Safety
 * `model` must be valid and `case_name` NUL-terminated.
 */
enum RlqStatus rlq_model_validate(const struct RlqModel *model,
                                  const char *case_name,
                                  double delta);

/**
 * Integrates the Riccati system on `steps` uniform steps. `radius` is used by `Truncated` only.
 *
 * # Safety
 * `model` must be valid; `out` must be writable.
 */
enum RlqStatus rlq_solve(const struct RlqModel *model,
                         size_t steps,
                         enum RlqVariant variant,
                         double radius,
                         struct RlqSolution **out);

/**
 * # Safety
 * `solution` must come from `rlq_solve` and not be used afterwards.
 */
void rlq_solution_free(struct RlqSolution *solution);

/**
 * Number of solver steps (nodes are `0..=steps`).
 *
 * # Safety
 * Pointers must be valid.
 */
enum RlqStatus rlq_solution_steps(const struct RlqSolution *solution, size_t *steps);

/**
 * `P1`, `P2` of `regime` at node `node`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RlqStatus rlq_solution_node(const struct RlqSolution *solution,
                                 size_t regime,
                                 size_t node,
                                 double *p1,
                                 double *p2);

/**
 * `P1`, `P2` of `regime` at time `t`, linearly interpolated between nodes.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RlqStatus rlq_solution_at(const struct RlqSolution *solution,
                               size_t regime,
                               double t,
                               double *p1,
                               double *p2);

/**
 * `V(x, regime) = P1(0)(x⁺)² + P2(0)(x⁻)²`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RlqStatus rlq_solution_value(const struct RlqSolution *solution,
                                  double x,
                                  size_t regime,
                                  double *value);

/**
 * Builds the optimal feedback law of a full solution.
 *
 * # Safety
 * Pointers must be valid; `out` must be writable.
 */
enum RlqStatus rlq_law_new(const struct RlqModel *model,
                           const struct RlqSolution *solution,
                           struct RlqLaw **out);

/**
 * # Safety
 * `law` must come from `rlq_law_new` and not be used afterwards.
 */
void rlq_law_free(struct RlqLaw *law);

/**
 * Controls at `(t, X(t-) = x, regime)`. `u1` receives `m1` values, `u2`
 * receives `n_atoms * m2` values, atom-major.
 *
 * # Safety
 * `u1` and `u2` must hold `u1_len` and `u2_len` doubles.
 */
enum RlqStatus rlq_law_control_at(const struct RlqLaw *law,
                                  double t,
                                  double x,
                                  size_t regime,
                                  double *u1,
                                  size_t u1_len,
                                  double *u2,
                                  size_t u2_len);

/**
 * Runs the verification harness and returns the report as a JSON string
 * (free with [`rlq_string_free`]). A failed verdict still returns `Ok`;
 * `passed` receives 1 or 0.
 *
 * # Safety
 * Pointers must be valid; `case_name` NUL-terminated.
 */
enum RlqStatus rlq_verify(const struct RlqModel *model,
                          const char *case_name,
                          double delta,
                          const struct RlqVerifyOptions *options,
                          char **report_json,
                          int32_t *passed);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void rlq_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGIME_LQ_H */
