#ifndef PRICING_LAB_H
#define PRICING_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum PlStatus {
  PL_STATUS_OK = 0,
  // A required pointer argument was null.
  PL_STATUS_NULL_POINTER = 1,
  // Malformed argument: wrong dimension, non-finite value, bad UTF-8.
  PL_STATUS_INVALID_INPUT = 2,
  // Rejected configuration or policy parameters.
  PL_STATUS_CONFIG = 3,
  // A linear-algebra routine failed.
  PL_STATUS_NUMERIC = 4,
  // Calls made in the wrong order, e.g. observing before choosing a price.
  PL_STATUS_CONTRACT = 5,
  // Problem instance violates a modelling assumption (elasticity sign, bias too large).
  PL_STATUS_INFEASIBLE = 6,
  // Reading or writing files failed.
  PL_STATUS_IO = 7,
  // Internal panic; the handle involved should be discarded.
  PL_STATUS_PANIC = 8,
} PlStatus;

// Results of a replicated experiment.
typedef struct PlExperiment PlExperiment;

// Offline log of `(x, y, price, demand)` rows.
typedef struct PlOffline PlOffline;

// A pricing policy for one episode.
typedef struct PlPolicy PlPolicy;

// Tuning of a pricing policy. Fields a kind does not use are ignored.
// Start from [`pl_policy_params_default`].
typedef struct PlPolicyParams {
  size_t horizon;
  // Bias bound `V` (co3, gco3).
  double v_bound;
  double lam;
  double eps;
  size_t grid_size;
  size_t restarts;
  // Test exponent (rco3).
  double alpha_exp;
  // Test-length constant (rco3).
  double test_scale;
  // Prior covariance multiplier (ts, ts_offline).
  double prior_cov_scale;
  // Assumed noise level (ts, ts_offline); NaN uses the spec's `noise_r`.
  double noise_sigma;
} PlPolicyParams;

// Known bounds of a pricing problem.
typedef struct PlProblemSpec {
  size_t d1;
  size_t d2;
  double alpha_max;
  double beta_max;
  double x_max;
  double y_max;
  double y_min;
  double l_alpha;
  double u_alpha;
  double l_beta;
  double u_beta;
  double noise_r;
  double lambda_min_exx;
} PlProblemSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Defaults for a run of `horizon` rounds.
struct PlPolicyParams pl_policy_params_default(size_t horizon);

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *pl_last_error_message(void);

// Library version, static storage.
const char *pl_version(void);

enum PlStatus pl_offline_new(size_t d1, size_t d2, struct PlOffline **out);

// Appends one row; `x` has `d1` entries and `y` has `d2`.
enum PlStatus pl_offline_push(struct PlOffline *h,
                              const double *x,
                              const double *y,
                              double price,
                              double demand);

enum PlStatus pl_offline_len(const struct PlOffline *h, size_t *out);

// Releases an offline log; null is a no-op.
void pl_offline_free(struct PlOffline *h);

// Creates a policy by kind name: `co3`, `gco3`, `rco3`, `ucb`,
// `ucb_offline`, `ts`, `ts_offline` or `greedy_offline`. `offline` may be
// null for kinds that do not use a log. Use [`pl_policy_new_clairvoyant`]
// for the benchmark policy.
enum PlStatus pl_policy_new(const char *kind,
                            const struct PlProblemSpec *spec,
                            const struct PlPolicyParams *params,
                            const struct PlOffline *offline,
                            uint64_t seed,
                            struct PlPolicy **out);

// Policy that always charges the optimal price for `(alpha, beta)`.
enum PlStatus pl_policy_new_clairvoyant(const double *alpha,
                                        const double *beta,
                                        const struct PlProblemSpec *spec,
                                        struct PlPolicy **out);

// Price for context `(x, y)`; must be followed by [`pl_policy_observe`].
enum PlStatus pl_policy_choose_price(struct PlPolicy *h,
                                     const double *x,
                                     const double *y,
                                     double *out_price);

// Demand realized at the last chosen price.
enum PlStatus pl_policy_observe(struct PlPolicy *h, double demand);

// Writes the policy's fixed internal decision (for example `greedy` or
// `optimistic`) into `buf` as a NUL-terminated string, truncating to
// `len` bytes. Writes an empty string for kinds without one.
enum PlStatus pl_policy_status(const struct PlPolicy *h, char *buf, size_t len);

// Releases a policy; null is a no-op.
void pl_policy_free(struct PlPolicy *h);

// Runs the experiment described by a JSON config on `threads` workers
// (0 picks one per core). Results do not depend on `threads`.
enum PlStatus pl_experiment_run(const char *config_json, size_t threads, struct PlExperiment **out);

// Mean cumulative regret at the horizon of the policy labelled `label`.
enum PlStatus pl_experiment_mean_final(const struct PlExperiment *h,
                                       const char *label,
                                       double *out);

// Writes `traces.csv`, `aggregate.csv` and `manifest.json` into `dir`.
enum PlStatus pl_experiment_write(const struct PlExperiment *h, const char *dir);

// Releases an experiment; null is a no-op.
void pl_experiment_free(struct PlExperiment *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRICING_LAB_H */
