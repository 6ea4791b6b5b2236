#ifndef VOI_H
#define VOI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum VoiStatus {
  VOI_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  VOI_STATUS_NULL_POINTER = 1,
  /*
   Malformed input: bad sizes, non-stochastic rows, out-of-range values.
   */
  VOI_STATUS_INVALID_INPUT = 2,
  VOI_STATUS_DIMENSION_MISMATCH = 3,
  VOI_STATUS_CONTRACT_VIOLATION = 4,
  VOI_STATUS_UNSUPPORTED = 5,
  VOI_STATUS_DIVERGED = 6,
  VOI_STATUS_IO = 7,
  VOI_STATUS_CONFIG = 8,
  /*
   A Rust panic was caught at the boundary.
   */
  VOI_STATUS_PANIC = 9,
} VoiStatus;

/*
 Which built-in grid a vehicle model uses.
 */
typedef enum VoiGridKind {
  /*
   The control-quality grid (about 21k states, tens of seconds to build).
   */
  VOI_GRID_KIND_DEFAULT = 0,
  /*
   A coarse grid for quick cross-checks (about 1.3k states).
   */
  VOI_GRID_KIND_SMALL = 1,
} VoiGridKind;

/*
 Opaque tabular MDP.
 */
typedef struct VoiMdp VoiMdp;

/*
 Opaque discretised vehicle-following model with its DP solution.
 */
typedef struct VoiVehicleModel VoiVehicleModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null if there was none.
 The pointer stays valid until the next failing call on this thread.
 */
const char *voi_last_error_message(void);

/*
 Clears the last-error message of this thread.
 */
void voi_clear_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *voi_version(void);

/*
 `J_inf − J_sup`.
 */
double voi_evoi(double j_inf, double j_sup);

/*
 Builds an MDP from a dense `P[s][a][s']` tensor (`n_states² · n_actions`
 values), `R[s][a]` (`n_states · n_actions`) and an initial distribution
 (`n_states`). On success `*out` owns a handle for [`voi_mdp_free`].

 # Safety
 Each pointer must be valid for the stated number of reads; `out` must be
 writable.
 */
enum VoiStatus voi_mdp_new(size_t n_states,
                           size_t n_actions,
                           const double *transitions,
                           const double *rewards,
                           double gamma,
                           const double *init,
                           struct VoiMdp **out);

/*
 Releases an MDP handle. Null is a no-op.

 # Safety
 `mdp` must come from [`voi_mdp_new`] and not be used afterwards.
 */
void voi_mdp_free(struct VoiMdp *mdp);

/*
 Number of states and actions.

 # Safety
 `mdp` must be a live handle; the outputs must be writable.
 */
enum VoiStatus voi_mdp_shape(const struct VoiMdp *mdp, size_t *n_states, size_t *n_actions);

/*
 Value iteration to sup-norm residual `tol`. Writes `n_states` values and
 greedy actions; either output may be null to skip it.

 # Safety
 `mdp` must be a live handle; non-null outputs must hold `n_states` entries.
 */
enum VoiStatus voi_mdp_value_iteration(const struct VoiMdp *mdp,
                                       double tol,
                                       double *values,
                                       uint32_t *policy,
                                       size_t len);

/*
 Exact state values and initial-distribution performance of a
 deterministic policy. `values` may be null.

 # Safety
 `mdp` must be a live handle; `policy` and non-null `values` must hold
 `len == n_states` entries; `performance` must be writable.
 */
enum VoiStatus voi_mdp_evaluate(const struct VoiMdp *mdp,
                                const uint32_t *policy,
                                size_t len,
                                double *values,
                                double *performance);

/*
 Exact EVoI of two deterministic policies and its occupancy-weighted
 IVoI decomposition.

 # Safety
 `mdp` must be a live handle; both policies must hold `len == n_states`
 entries; the outputs must be writable.
 */
enum VoiStatus voi_mdp_evoi_decomposition(const struct VoiMdp *mdp,
                                          const uint32_t *pi_inf,
                                          const uint32_t *pi_sup,
                                          size_t len,
                                          double *evoi,
                                          double *weighted_ivoi);

/*
 Discretises the follower dynamics with default vehicle parameters and
 reward weights and solves the resulting MDP.

 # Safety
 `out` must be writable.
 */
enum VoiStatus voi_vehicle_model_build(enum VoiGridKind grid,
                                       uint64_t seed,
                                       struct VoiVehicleModel **out);

/*
 Releases a vehicle model. Null is a no-op.

 # Safety
 `model` must come from [`voi_vehicle_model_build`] and not be used
 afterwards.
 */
void voi_vehicle_model_free(struct VoiVehicleModel *model);

/*
 Number of grid states.

 # Safety
 `model` must be a live handle and `n` writable.
 */
enum VoiStatus voi_vehicle_model_n_states(const struct VoiVehicleModel *model, size_t *n);

/*
 Superior control for an observation `[e_p, e_v, acc, acc_pred]`.

 # Safety
 `model` must be a live handle, `obs` must hold `len` values and `u`
 must be writable.
 */
enum VoiStatus voi_vehicle_model_action(const struct VoiVehicleModel *model,
                                        const double *obs,
                                        size_t len,
                                        double *u);

/*
 IVoI of control `u` at an observation: the superior policy's advantage
 `A(obs, u)`, never positive.

 # Safety
 `model` must be a live handle, `obs` must hold `len` values and `ivoi`
 must be writable.
 */
enum VoiStatus voi_vehicle_model_ivoi(const struct VoiVehicleModel *model,
                                      const double *obs,
                                      size_t len,
                                      double u,
                                      double *ivoi);

/*
 Runs an experiment described by TOML text. `*pass` receives 1 when the
 scenario's checks pass and 0 otherwise; artifacts go to the configured
 output directory.

 # Safety
 `config_toml` must be a NUL-terminated string and `pass` writable.
 */
enum VoiStatus voi_run_config(const char *config_toml, int32_t *pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOI_H */
