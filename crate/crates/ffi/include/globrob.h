#ifndef GLOBROB_H
#define GLOBROB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * MIP outcome codes of [`GrRun::status`].
 */
#define GR_RUN_OPTIMAL 0

#define GR_RUN_INFEASIBLE 1

#define GR_RUN_TIMEOUT 2

#define GR_RUN_NODE_LIMIT 3

#define GR_RUN_SIGN_RESOLVED 4

#define GR_RUN_STALLED 5

typedef enum GrStatus {
  GR_OK = 0,
  GR_NULL_POINTER = 1,
  GR_INVALID_UTF8 = 2,
  GR_PARSE = 3,
  GR_VALIDATION = 4,
  GR_ARGUMENT = 5,
  GR_INPUT_SHAPE = 6,
  GR_CLASS_INDEX = 7,
  GR_IO = 8,
  GR_INFEASIBLE_INPUT = 9,
  GR_UNSUPPORTED = 10,
  GR_INTERNAL = 11,
  GR_PANIC = 12,
} GrStatus;

/**
 * Opaque network handle.
 */
typedef struct GrNetwork GrNetwork;

/**
 * Opaque verification report handle.
 */
typedef struct GrReport GrReport;

typedef struct GrVerifyOptions {
  /**
   * Seconds per MIP.
   */
  double timeout_secs;
  /**
   * Precision level added to the non-robust bound.
   */
  double precision;
  uint64_t seed;
  bool use_deps;
  bool use_attack;
  bool use_hints;
} GrVerifyOptions;

typedef struct GrBounds {
  double nonrobust_lower;
  double nonrobust_upper;
  double robust_lower;
  double robust_upper;
  /**
   * Every MIP reached a proven optimum.
   */
  bool complete;
} GrBounds;

typedef struct GrRun {
  uintptr_t target;
  int32_t status;
  double lower;
  double upper;
  double attack_lower;
  uintptr_t nodes;
} GrRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *gr_last_error(void);

/**
 * Loads a network file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum GrStatus gr_network_load(const char *path, struct GrNetwork **out);

/**
 * Parses a network from JSON text.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum GrStatus gr_network_parse(const char *json, struct GrNetwork **out);

/**
 * # Safety
 * `net` must come from this library and not be used afterwards.
 */
void gr_network_free(struct GrNetwork *net);

/**
 * Input length, 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
uintptr_t gr_network_input_len(const struct GrNetwork *net);

/**
 * Number of classes, 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
uintptr_t gr_network_num_classes(const struct GrNetwork *net);

/**
 * Class confidence of `class` at input `x` of length `len`.
 *
 * # Safety
 * `x` must point to `len` doubles and `out` must be valid.
 */
enum GrStatus gr_network_confidence(const struct GrNetwork *net,
                                    const double *x,
                                    uintptr_t len,
                                    uintptr_t class_,
                                    double *out);

struct GrVerifyOptions gr_verify_options_default(void);

/**
 * Verifies `c_prime` against `n_targets` target classes under the
 * perturbation given in text syntax, e.g. `"occlusion(1,1,1)"`. A null
 * `options` means the defaults.
 *
 * # Safety
 * Pointers must be valid; `targets` must hold `n_targets` entries.
 */
enum GrStatus gr_verify(const struct GrNetwork *net,
                        uintptr_t c_prime,
                        const uintptr_t *targets,
                        uintptr_t n_targets,
                        const char *perturbation,
                        const struct GrVerifyOptions *options,
                        struct GrReport **out);

/**
 * # Safety
 * `report` must come from this library and not be used afterwards.
 */
void gr_report_free(struct GrReport *report);

/**
 * # Safety
 * `report` and `out` must be valid.
 */
enum GrStatus gr_report_bounds(const struct GrReport *report, struct GrBounds *out);

/**
 * Number of MIP runs, 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
uintptr_t gr_report_num_runs(const struct GrReport *report);

/**
 * # Safety
 * `report` and `out` must be valid.
 */
enum GrStatus gr_report_run(const struct GrReport *report, uintptr_t index, struct GrRun *out);

/**
 * The full report as JSON; release with [`gr_string_free`]. Null on error.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *gr_report_to_json(const struct GrReport *report);

/**
 * # Safety
 * `s` must come from [`gr_report_to_json`] and not be used afterwards.
 */
void gr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLOBROB_H */
