/*
 * C interface to the aerochannel library: closed-form infection rates for
 * discrete memoryless channel models of airborne transmission, exact channel
 * evaluation, virion dose helpers, and seeded Monte Carlo transition
 * estimation for indoor scenes.
 *
 * Conventions:
 *   - Fallible functions return aero_status; AERO_OK (0) means success and
 *     results are written through out-pointers.
 *   - On failure, aero_last_error() returns a thread-local message valid
 *     until the next failing call on the same thread.
 *   - AeroChannel and AeroEstimate are opaque handles owned by the library;
 *     release them with their _free functions. Strings returned through
 *     char ** must be released with aero_string_free().
 *
 * This header is maintained by hand and kept in sync with the exported
 * symbols by the crate's test suite.
 */

#ifndef AEROCHANNEL_H
#define AEROCHANNEL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aero_status {
  AERO_OK = 0,
  AERO_ERR_NULL_POINTER = 1,
  AERO_ERR_INVALID_UTF8 = 2,
  /* Parameter or configuration validation failed. */
  AERO_ERR_INVALID = 3,
  /* I/O or other runtime failure. */
  AERO_ERR_RUNTIME = 4,
} aero_status;

/* Opaque handles. */
typedef struct AeroChannel AeroChannel;
typedef struct AeroEstimate AeroEstimate;

/* Thread-local message for the most recent failure on this thread. */
const char *aero_last_error(void);

/* Release a string returned through a char ** out-parameter. */
void aero_string_free(char *s);

/* ------------------------------------------------------------------ */
/* Closed-form infection rates (bits per channel event)               */
/* ------------------------------------------------------------------ */

/* Point-to-point: -q1 * p1 * log2(p1). */
aero_status aero_mi_z(double p1, double q1, double *out);

/* Two transmitters, one receiver: the single-source rates add. */
aero_status aero_mi_two_tx(double p1, double q1, double p2, double q2,
                           double *out);

/* One transmitter, two receivers: individual rates per receiver. */
aero_status aero_mi_two_rx(double p1, double q1, double q2, double *out_rx1,
                           double *out_rx2);

/* Passive relay, second-hop form: -q2 * (p1 q1) * log2(p1 q1). */
aero_status aero_mi_passive_relay(double p1, double q1, double q2,
                                  double *out);

/* Passive relay, end-to-end composed channel: -q1 q2 * p1 * log2(p1). */
aero_status aero_mi_relay_end_to_end(double p1, double q1, double q2,
                                     double *out);

/* Active relay past its incubation time: -q2 * boost * log2(boost). */
aero_status aero_mi_active_relay(double boost, double q2, double *out);

/* Ternary input (uninfected / aerosol / droplet); needs p1 + p2 <= 1. */
aero_status aero_mi_ternary(double p1, double q1, double p2, double q2,
                            double *out);

/* ------------------------------------------------------------------ */
/* Dose and kinematics helpers                                         */
/* ------------------------------------------------------------------ */

/* Probability a particle of this diameter (m) carries at least one virion
 * at the given oral-fluid viral load (copies per milliliter). */
aero_status aero_virion_probability(double diameter_m, double copies_per_ml,
                                    double *out);

/* Expected virion count per particle of this diameter (m). */
aero_status aero_expected_virions(double diameter_m, double copies_per_ml,
                                  double *out);

/* Stokes terminal settling speed (m/s) at default physics constants. */
aero_status aero_terminal_velocity(double diameter_m, double *out);

/* ------------------------------------------------------------------ */
/* Exact channel evaluation                                            */
/* ------------------------------------------------------------------ */

/* Parse a channel document:
 *   {"inputs": [...], "outputs": [...], "p_x": [...],
 *    "transitions": [[...], ...]}
 * The handle must be released with aero_channel_free(). */
aero_status aero_channel_from_json(const char *json, AeroChannel **out);

void aero_channel_free(AeroChannel *ch);

/* Average mutual information I(X;Y), bits. */
aero_status aero_channel_mutual_information(const AeroChannel *ch,
                                            double *out);

/* Per-output-event contribution I(X; Y = y_j), bits (may be negative). */
aero_status aero_channel_per_output_mi(const AeroChannel *ch,
                                       size_t output_index, double *out);

/* Infection rate: the per-output contributions summed over the infectious
 * output indices. A null/empty set yields zero. */
aero_status aero_channel_infection_rate(const AeroChannel *ch,
                                        const size_t *infectious, size_t len,
                                        double *out);

/* Linear infection measure: total probability of the infectious outputs. */
aero_status aero_channel_linear_measure(const AeroChannel *ch,
                                        const size_t *infectious, size_t len,
                                        double *out);

/* ------------------------------------------------------------------ */
/* Monte Carlo transition estimation                                   */
/* ------------------------------------------------------------------ */

/* Run `runs` seeded trials of an environment document (the same JSON schema
 * the CLI consumes) and aggregate them. Deterministic in
 * (document, runs, master_seed). Release with aero_estimate_free(). */
aero_status aero_estimate_run(const char *env_json, uint32_t runs,
                              uint64_t master_seed, AeroEstimate **out);

void aero_estimate_free(AeroEstimate *est);

/* Transition table as CSV:
 * receiver_id,d_lo,d_hi,emitted,hits,q_hat,stderr */
aero_status aero_estimate_transitions_csv(const AeroEstimate *est, char **out);

/* Infection measures versus viral load for one receiver, as CSV:
 * load,R_bits,linear_measure,phi,n,nR,nPhi */
aero_status aero_estimate_rate_curve_csv(const AeroEstimate *est,
                                         const char *receiver_id,
                                         const double *loads, size_t n_loads,
                                         uint64_t n_events, char **out);

/* Environment document of a builtin preset: office, corridor, classroom,
 * or bus. */
aero_status aero_preset_json(const char *name, char **out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* AEROCHANNEL_H */
