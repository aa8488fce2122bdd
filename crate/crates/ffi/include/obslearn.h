#ifndef OBSLEARN_H
#define OBSLEARN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  OBS_STATUS_OK = 0,
  OBS_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument, malformed input text or a resource limit.
   */
  OBS_STATUS_INVALID = 2,
  /**
   * A verification ran but its check failed.
   */
  OBS_STATUS_CHECK_FAILED = 3,
  /**
   * Numerical or internal failure.
   */
  OBS_STATUS_INTERNAL = 4,
  OBS_STATUS_PANIC = 5,
} obs_status;

typedef struct obs_circuit obs_circuit;

typedef struct obs_lasso_model obs_lasso_model;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *obs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *obs_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void obs_string_free(char *s);

/**
 * Parses a circuit from its text form.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` writable.
 */
obs_status obs_circuit_parse(const char *text, obs_circuit **out);

/**
 * Random circuit of `gates` gates on `n` qubits, seeded.
 *
 * # Safety
 * `out` must be writable.
 */
obs_status obs_circuit_random(uintptr_t n, uintptr_t gates, uint64_t seed, obs_circuit **out);

/**
 * # Safety
 * `c` must be a live handle or null.
 */
void obs_circuit_free(obs_circuit *c);

/**
 * # Safety
 * `c` must be a live handle.
 */
uintptr_t obs_circuit_n_qubits(const obs_circuit *c);

/**
 * # Safety
 * `c` must be a live handle.
 */
uintptr_t obs_circuit_len(const obs_circuit *c);

/**
 * Text form of the circuit; free with [`obs_string_free`].
 *
 * # Safety
 * `c` must be a live handle and `out` writable.
 */
obs_status obs_circuit_to_string(const obs_circuit *c, char **out);

/**
 * Perfect-transfer check of the weighted clock Hamiltonian on the input state
 * `re + i·im` (length `2^n`, normalized here). Writes the fidelity with `U|ψ⟩|k⟩`;
 * returns [`ObsStatus::CheckFailed`] when it is below `1 − tol`.
 *
 * # Safety
 * `re` and `im` must hold `len` doubles; `fidelity` must be writable.
 */
obs_status obs_verify_transfer(const obs_circuit *c,
                               const double *re,
                               const double *im,
                               uintptr_t len,
                               double tol,
                               double *fidelity);

/**
 * LASSO training-set size for budget `b`, `m` features, confidence `delta`, slack `eps3`.
 *
 * # Safety
 * `out` must be writable.
 */
obs_status obs_sample_complexity(double b, uintptr_t m, double delta, double eps3, uint64_t *out);

/**
 * Euclidean projection of `v` onto the ℓ1 ball of radius `b`, in place.
 *
 * # Safety
 * `v` must hold `len` doubles.
 */
obs_status obs_project_l1(double *v, uintptr_t len, double b);

/**
 * Trains an ℓ1-constrained linear model on `n` rows of `m` features (row-major).
 *
 * # Safety
 * `features` must hold `n·m` doubles, `labels` `n` doubles, `out` writable.
 */
obs_status obs_lasso_train(const double *features,
                           const double *labels,
                           uintptr_t n,
                           uintptr_t m,
                           double b,
                           double eps3,
                           obs_lasso_model **out);

/**
 * # Safety
 * `model` must be a live handle or null.
 */
void obs_lasso_free(obs_lasso_model *model);

/**
 * Number of weights in the model.
 *
 * # Safety
 * `model` must be a live handle.
 */
uintptr_t obs_lasso_dim(const obs_lasso_model *model);

/**
 * Copies the weights into `w` (capacity `len`, at least [`obs_lasso_dim`]).
 *
 * # Safety
 * `model` must be live and `w` hold `len` doubles.
 */
obs_status obs_lasso_weights(const obs_lasso_model *model, double *w, uintptr_t len);

/**
 * Training MSE of the model.
 *
 * # Safety
 * `model` must be live and `out` writable.
 */
obs_status obs_lasso_train_mse(const obs_lasso_model *model, double *out);

/**
 * Predicts `w·φ` for one feature vector of length `len`.
 *
 * # Safety
 * `model` must be live, `phi` hold `len` doubles, `out` writable.
 */
obs_status obs_lasso_predict(const obs_lasso_model *model,
                             const double *phi,
                             uintptr_t len,
                             double *out);

/**
 * Runs an experiment from a JSON config. Writes the deterministic report payload as JSON;
 * free it with [`obs_string_free`]. Returns [`ObsStatus::CheckFailed`] (with the report
 * still written) when the experiment does not pass.
 *
 * # Safety
 * `config_json` must be NUL-terminated and `out` writable.
 */
obs_status obs_run_experiment(const char *config_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OBSLEARN_H */
