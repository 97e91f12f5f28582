#ifndef TRUSTFLOW_H
#define TRUSTFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_ARGUMENT = 2,
  TF_STATUS_DOMAIN_ERROR = 3,
  TF_STATUS_PANIC = 4,
} TfStatus;

/**
 * A running simulation.
 */
typedef struct TfSimulation TfSimulation;

/**
 * Combined trust of one observer in one subject.
 */
typedef struct TfTrustState TfTrustState;

typedef struct TfRoundMetrics {
  uint64_t round;
  uint64_t packets_sent;
  uint64_t packets_delivered;
  double delivery_ratio;
  double throughput;
  double avoid_probability;
  uint64_t detected_malicious;
  double spoofed_fraction;
  uint64_t admissible_paths;
} TfRoundMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Beta opinion of `Beta(alpha, beta)`: belief and uncertainty.
 *
 * # Safety
 * `belief` and `uncertainty` must be valid for writes or null.
 */
enum TfStatus tf_beta_opinion(double alpha, double beta, double *belief, double *uncertainty);

/**
 * MAP trust after `r` positive outcomes out of `n` under a
 * `Beta(prior_alpha, prior_beta)` prior.
 *
 * # Safety
 * `out` must be valid for writes or null.
 */
enum TfStatus tf_map_trust(uint64_t r,
                           uint64_t n,
                           double prior_alpha,
                           double prior_beta,
                           double *out);

/**
 * Wall-post trust from post counts, contact count and decay constant.
 *
 * # Safety
 * `out` must be valid for writes or null.
 */
enum TfStatus tf_wallpost_trust(uint64_t posts_on_j,
                                uint64_t total_posts,
                                uint64_t contacts,
                                double decay,
                                double *out);

/**
 * `eta * wallpost + (1 - eta) * ips`.
 *
 * # Safety
 * `out` must be valid for writes or null.
 */
enum TfStatus tf_social_trust(double ips, double wallpost, double eta, double *out);

/**
 * New trust state seeded from a social trust value with prior weight
 * `strength` (in observations).
 *
 * # Safety
 * `out` must be valid for writes or null.
 */
enum TfStatus tf_trust_state_new(double social, double strength, struct TfTrustState **out);

/**
 * Records one forwarding observation.
 *
 * # Safety
 * `state` must come from [`tf_trust_state_new`] and not be freed, or be null.
 */
enum TfStatus tf_trust_state_observe(struct TfTrustState *state, bool forwarded);

/**
 * # Safety
 * `state` must come from [`tf_trust_state_new`] or be null; `out` must be
 * valid for writes or null.
 */
enum TfStatus tf_trust_state_value(const struct TfTrustState *state, double *out);

/**
 * # Safety
 * `state` must come from [`tf_trust_state_new`] and not be freed already.
 */
void tf_trust_state_free(struct TfTrustState *state);

/**
 * New simulation from scenario INI text, or the built-in desk profile
 * when `config` is null.
 *
 * # Safety
 * `config` must be a NUL-terminated string or null; `out` must be valid
 * for writes or null.
 */
enum TfStatus tf_simulation_new(const char *config, struct TfSimulation **out);

/**
 * Runs one round and writes its metrics.
 *
 * # Safety
 * `sim` must come from [`tf_simulation_new`] or be null; `out` must be
 * valid for writes or null.
 */
enum TfStatus tf_simulation_step(struct TfSimulation *sim, struct TfRoundMetrics *out);

/**
 * Current trust of `observer` in `subject`.
 *
 * # Safety
 * `sim` must come from [`tf_simulation_new`] or be null; `out` must be
 * valid for writes or null.
 */
enum TfStatus tf_simulation_trust(const struct TfSimulation *sim,
                                  uint32_t observer,
                                  uint32_t subject,
                                  double *out);

/**
 * # Safety
 * `sim` must come from [`tf_simulation_new`] and not be freed already.
 */
void tf_simulation_free(struct TfSimulation *sim);

/**
 * Copies the calling thread's last error message into a new string, or
 * writes null if there is none. Free the string with [`tf_string_free`].
 *
 * # Safety
 * `out` must be valid for writes or null.
 */
enum TfStatus tf_last_error(char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed already, or be null.
 */
void tf_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRUSTFLOW_H */
