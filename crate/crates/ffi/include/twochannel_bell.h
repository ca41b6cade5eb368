#ifndef TWOCHANNEL_BELL_H
#define TWOCHANNEL_BELL_H

/* Generated by cbindgen from src/lib.rs. Do not edit by hand. */

#include <stdbool.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum TcbStatus {
  TCB_STATUS_OK = 0,
  TCB_STATUS_NULL_POINTER = 1,
  TCB_STATUS_INVALID_UTF8 = 2,
  TCB_STATUS_INVALID_CONFIG = 3,
  TCB_STATUS_INCONSISTENT_CONFIG = 4,
  TCB_STATUS_UNSUPPORTED_GEOMETRY = 5,
  TCB_STATUS_DEGENERATE_DENOMINATOR = 6,
  TCB_STATUS_INVALID_INPUT = 7,
  TCB_STATUS_INTERNAL = 8,
} TcbStatus;

// Opaque experiment configuration.
typedef struct TcbConfig TcbConfig;

// Analyzer orientations in degrees.
typedef struct TcbSettings {
  double a;
  double a_prime;
  double b;
  double b_prime;
  double r;
  double s;
} TcbSettings;

// Coincidence probabilities of the four detector pairs.
typedef struct TcbCoincidences {
  double pp;
  double mm;
  double pm;
  double mp;
} TcbCoincidences;

// The ten variables of the bilinear lemma.
typedef struct TcbZInstance {
  double x1p;
  double x1m;
  double x2p;
  double x2m;
  double y1p;
  double y1m;
  double y2p;
  double y2m;
  double u;
  double v;
} TcbZInstance;

// Minimum of `Z` over the x variables for fixed y, U, V.
typedef struct TcbCaseMinimum {
  double value;
  double x1p;
  double x1m;
  double x2p;
  double x2m;
  uint8_t case_id;
} TcbCaseMinimum;

// Summary of the sweep over deterministic local strategies.
typedef struct TcbLhvBound {
  double min_value;
  uint32_t vertex_count;
  uint32_t attaining;
  uint32_t degenerate_excluded;
  uint32_t violations;
  bool passed;
} TcbLhvBound;

// Best analyzer angles (degrees, reduced into [0, 180)) and the value there.
typedef struct TcbOptimum {
  double a;
  double a_prime;
  double b;
  double b_prime;
  double value;
} TcbOptimum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *tcb_version(void);

// Message of the last failed call on this thread, or an empty string.
// Valid until the next library call on the same thread.
const char *tcb_last_error_message(void);

// Default configuration: η = 0.2, φ = 30°, F = 1, the 120° reference settings.
// Release with [`tcb_config_free`].
struct TcbConfig *tcb_config_new_default(void);

// Parses a JSON config document (same format as the command-line tool).
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum TcbStatus tcb_config_from_json(const char *json, struct TcbConfig **out);

// # Safety
// `config` must come from this library and not be used afterwards. Null is ignored.
void tcb_config_free(struct TcbConfig *config);

// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum TcbStatus tcb_config_get_settings(const struct TcbConfig *config, struct TcbSettings *out);

// Replaces the analyzer settings. Angles must be finite.
//
// # Safety
// `config` must be a live handle and `settings` a valid pointer.
enum TcbStatus tcb_config_set_settings(struct TcbConfig *config,
                                       const struct TcbSettings *settings);

// Probability that one channel of one side fires, `ηΩ/8π`.
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum TcbStatus tcb_singles_probability(const struct TcbConfig *config, double *out);

// Coincidence probabilities for analyzers at `first_deg` and `second_deg`.
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum TcbStatus tcb_joint_probabilities(const struct TcbConfig *config,
                                       double first_deg,
                                       double second_deg,
                                       struct TcbCoincidences *out);

// Quantum value of the ratio inequality (local bound −1) at the config's settings.
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum TcbStatus tcb_ratio_lhs(const struct TcbConfig *config, double *out);

// Quantum value of the singles-based inequality (local bound −1).
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum TcbStatus tcb_expression22_lhs(const struct TcbConfig *config, double *out);

// CHSH value at the config's `a`, `a′`, `b`, `b′`.
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum TcbStatus tcb_chsh_value(const struct TcbConfig *config, double *out);

// Margin of the factor-1.5 violation relative to the CHSH margin `√2 − 1`.
double tcb_violation_margin_ratio(void);

// `Z` of the bilinear lemma. Fails if the instance is outside `x ≤ U`, `y ≤ V`.
//
// # Safety
// `instance` and `out` must be valid pointers.
enum TcbStatus tcb_z_value(const struct TcbZInstance *instance, double *out);

// Closed-form minimum of `Z` over the x variables; the x fields of
// `instance` are ignored.
//
// # Safety
// `instance` and `out` must be valid pointers.
enum TcbStatus tcb_z_min_analytic(const struct TcbZInstance *instance, struct TcbCaseMinimum *out);

// Sweeps all deterministic local strategies for expression 22 or 28.
//
// # Safety
// `out` must be a valid pointer.
enum TcbStatus tcb_lhv_bound(uint32_t expression, struct TcbLhvBound *out);

// Runs the Monte Carlo pipeline and returns the run result as a JSON string.
// Release the string with [`tcb_string_free`].
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum TcbStatus tcb_simulate_json(const struct TcbConfig *config, uint32_t bootstrap, char **out);

// # Safety
// `text` must come from this library and not be used afterwards. Null is ignored.
void tcb_string_free(char *text);

// Minimizes the ratio inequality over `a`, `a′`, `b`, `b′` (grid scan plus
// coordinate descent). `grid_step_deg` must divide 180.
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum TcbStatus tcb_optimize_ratio(const struct TcbConfig *config,
                                  double grid_step_deg,
                                  uint32_t starts,
                                  uint32_t refine_iters,
                                  struct TcbOptimum *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* TWOCHANNEL_BELL_H */
