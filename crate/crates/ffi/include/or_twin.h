#ifndef OR_TWIN_H
#define OR_TWIN_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum OrTwinStatus {
  OR_TWIN_STATUS_OK = 0,
  OR_TWIN_STATUS_NULL_ARGUMENT = 1,
  OR_TWIN_STATUS_INVALID_UTF8 = 2,
  OR_TWIN_STATUS_PARSE_ERROR = 3,
  OR_TWIN_STATUS_VALIDATION_FAILED = 4,
  OR_TWIN_STATUS_DOMAIN_ERROR = 5,
  OR_TWIN_STATUS_IO_ERROR = 6,
  OR_TWIN_STATUS_UNSUPPORTED_FORMAT = 7,
  OR_TWIN_STATUS_INVALID_ARGUMENT = 8,
  OR_TWIN_STATUS_PANIC = 99,
} OrTwinStatus;

typedef enum OrTwinRunMode {
  OR_TWIN_RUN_MODE_SIMULATE = 0,
  OR_TWIN_RUN_MODE_PROSPECTIVE = 1,
  OR_TWIN_RUN_MODE_RETROSPECTIVE = 2,
} OrTwinRunMode;

// Which document of a result to export.
typedef enum OrTwinDocument {
  OR_TWIN_DOCUMENT_KPIS = 0,
  OR_TWIN_DOCUMENT_GANTT = 1,
  OR_TWIN_DOCUMENT_REPORT = 2,
} OrTwinDocument;

// The outcome of one run.
typedef struct OrTwinResult OrTwinResult;

// A loaded scenario bundle.
typedef struct OrTwinScenario OrTwinScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until
// the next call on the same thread.
const char *or_twin_last_error(void);

// Library version, a static string.
const char *or_twin_version(void);

// # Safety
// `s` is null or was returned by this library and not yet freed.
void or_twin_string_free(char *s);

// Loads and validates a configuration file or saved bundle.
//
// # Safety
// `config_path` is a NUL-terminated string; `out` is valid for a write.
enum OrTwinStatus or_twin_scenario_load(const char *config_path, struct OrTwinScenario **out);

// Loads the three tables, with an optional configuration (`config_path` may be null).
//
// # Safety
// Paths are NUL-terminated strings (config may be null); `out` is valid for a write.
enum OrTwinStatus or_twin_scenario_load_tables(const char *rooms_path,
                                               const char *cases_path,
                                               const char *durations_path,
                                               const char *config_path,
                                               struct OrTwinScenario **out);

// Parses and validates a JSON bundle.
//
// # Safety
// `json` is a NUL-terminated string; `out` is valid for a write.
enum OrTwinStatus or_twin_scenario_from_json(const char *json, struct OrTwinScenario **out);

// The bundle as JSON; free with [`or_twin_string_free`].
//
// # Safety
// `scenario` is a live handle; `out` is valid for a write.
enum OrTwinStatus or_twin_scenario_to_json(const struct OrTwinScenario *scenario, char **out);

// # Safety
// `scenario` is a live handle.
enum OrTwinStatus or_twin_scenario_set_seed(struct OrTwinScenario *scenario, uint64_t seed);

// # Safety
// `scenario` is a live handle.
enum OrTwinStatus or_twin_scenario_set_replications(struct OrTwinScenario *scenario,
                                                    uint32_t replications);

// Sets the room-selection strategy by token (`first_fit`, `best_fit`, ...).
//
// # Safety
// `scenario` is a live handle; `strategy` is a NUL-terminated string.
enum OrTwinStatus or_twin_scenario_set_strategy(struct OrTwinScenario *scenario,
                                                const char *strategy);

// # Safety
// `scenario` is null or a handle not yet freed.
void or_twin_scenario_free(struct OrTwinScenario *scenario);

// Runs the scenario in `mode`.
//
// # Safety
// `scenario` is a live handle; `out` is valid for a write.
enum OrTwinStatus or_twin_run(const struct OrTwinScenario *scenario,
                              enum OrTwinRunMode mode,
                              struct OrTwinResult **out);

// Headline utilization and overtime of a result.
//
// # Safety
// `result` is a live handle; the out pointers are valid for writes.
enum OrTwinStatus or_twin_result_kpis(const struct OrTwinResult *result,
                                      double *utilization,
                                      double *overtime);

// Canonical export of one document of a result; `format` is `json` or `csv`.
//
// # Safety
// `result` is a live handle; `format` is a NUL-terminated string; `out` is valid for a write.
enum OrTwinStatus or_twin_result_export(const struct OrTwinResult *result,
                                        enum OrTwinDocument document,
                                        const char *format,
                                        char **out);

// # Safety
// `result` is null or a handle not yet freed.
void or_twin_result_free(struct OrTwinResult *result);

// Evaluates a what-if insertion given as JSON
// (`arrival_time`, `preoperative_minutes`, `phases`, `strategy`) and
// writes the canonical response JSON. The scenario is not modified.
//
// # Safety
// `scenario` is a live handle; `request_json` is a NUL-terminated string; `out` is valid for a write.
enum OrTwinStatus or_twin_whatif(const struct OrTwinScenario *scenario,
                                 const char *request_json,
                                 char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OR_TWIN_H */
