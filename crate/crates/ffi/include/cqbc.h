#ifndef CQBC_H
#define CQBC_H

#pragma once

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define CQBC_THEOREM_THM1 0

#define CQBC_THEOREM_STEP2 1

#define CQBC_THEOREM_STEP3 2

typedef enum CqbcStatus {
  CQBC_STATUS_OK = 0,
  CQBC_STATUS_NULL_POINTER = 1,
  CQBC_STATUS_INVALID_ARGUMENT = 2,
  CQBC_STATUS_PARSE = 3,
  CQBC_STATUS_COMPUTATION = 4,
  CQBC_STATUS_PANIC = 5,
} CqbcStatus;

// Opaque broadcast channel.
typedef struct CqbcChannel CqbcChannel;

// Opaque auxiliary model.
typedef struct CqbcModel CqbcModel;

// Opaque inequality system for one channel and model.
typedef struct CqbcSystem CqbcSystem;

// Parameters of a Monte Carlo run; rates are in bits per channel use.
typedef struct CqbcSimParams {
  uintptr_t n;
  double delta1;
  double delta;
  double tau;
  double r1;
  double r;
  uintptr_t trials;
  uint64_t seed;
} CqbcSimParams;

// Per-receiver error rates with 95% Wilson intervals.
typedef struct CqbcSimResult {
  uint64_t errors[3];
  double rate[3];
  double ci_lo[3];
  double ci_hi[3];
  double mean_weight;
} CqbcSimResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cqbc_version(void);

// Message of the last failed call on this thread. The pointer stays valid
// until the next failing call on the same thread.
const char *cqbc_last_error_message(void);

// # Safety
// `s` must be null or a string returned by this library.
void cqbc_string_free(char *s);

// Von Neumann entropy in bits of a density matrix given as JSON.
//
// # Safety
// `state_json` must be a NUL-terminated string and `out` writable.
enum CqbcStatus cqbc_entropy(const char *state_json, double *out_bits);

// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum CqbcStatus cqbc_channel_from_json(const char *json, struct CqbcChannel **out_channel);

// # Safety
// `channel` must be null or a handle from [`cqbc_channel_from_json`].
void cqbc_channel_free(struct CqbcChannel *channel);

// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum CqbcStatus cqbc_model_from_json(const char *json, struct CqbcModel **out_model);

// # Safety
// `model` must be null or a handle from [`cqbc_model_from_json`].
void cqbc_model_free(struct CqbcModel *model);

// Builds the inequality system of `theorem` (one of `CQBC_THEOREM_*`).
//
// # Safety
// Handles must be live and `out_system` writable.
enum CqbcStatus cqbc_system_build(const struct CqbcChannel *channel,
                                  const struct CqbcModel *model,
                                  uint32_t theorem,
                                  struct CqbcSystem **out_system);

// # Safety
// `system` must be null or a handle from [`cqbc_system_build`].
void cqbc_system_free(struct CqbcSystem *system);

// Tests a rate triple under cost budget `tau`. `out_boundary` may be null.
//
// # Safety
// `system` must be live and `out_feasible` writable.
enum CqbcStatus cqbc_system_admits(const struct CqbcSystem *system,
                                   double r1,
                                   double r2,
                                   double r3,
                                   double tau,
                                   bool *out_feasible,
                                   bool *out_boundary);

// Support point of the region in direction `(d1, d2, d3)`. Sets
// `out_nonempty` to false when the region is empty.
//
// # Safety
// `system` must be live, `out_point` must hold three doubles.
enum CqbcStatus cqbc_system_support(const struct CqbcSystem *system,
                                    double d1,
                                    double d2,
                                    double d3,
                                    double *out_point,
                                    bool *out_nonempty);

// Serializes the system as JSON into a caller-owned string.
//
// # Safety
// `system` must be live and `out_json` writable.
enum CqbcStatus cqbc_system_to_json(const struct CqbcSystem *system, char **out_json);

// Runs the SRM sum-decoder lab on a JSON spec and returns the JSON report.
//
// # Safety
// `spec_json` must be a NUL-terminated string and `out_json` writable.
enum CqbcStatus cqbc_srm_lab(const char *spec_json, char **out_json);

// Monte Carlo block-error rates of the binary coset-code scheme.
//
// # Safety
// `params` must be readable and `out_result` writable.
enum CqbcStatus cqbc_simulate(const struct CqbcSimParams *params, struct CqbcSimResult *out_result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CQBC_H */
