#ifndef DYGPP_H
#define DYGPP_H

/* Generated by cbindgen from the dygpp-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Opaque event-log handle.
typedef struct DygppLog DygppLog;

// Opaque handle bundling a trained model with its parameters, the log it
// was built over, and the resolved configuration.
typedef struct DygppPredictor DygppPredictor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message for this thread into `buf` (truncated to
// `cap - 1` bytes, always NUL-terminated when `cap > 0`). Returns the full
// message length in bytes, or 0 when there is no pending error.
//
// # Safety
// `buf` must point to `cap` writable bytes (or be null with `cap == 0`).
size_t dygpp_last_error(char *buf, size_t cap);

// Parse an event CSV into a new log handle.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be a valid
// pointer to receive the handle.
int dygpp_log_open_csv(const char *path, struct DygppLog **out);

// Generate a synthetic commuter log (see the library's generator module).
//
// # Safety
// `out` must be a valid pointer to receive the handle.
int dygpp_log_generate(uint32_t passengers,
                       uint32_t stations,
                       uint32_t days,
                       double commuter_fraction,
                       double noise_rate,
                       uint64_t seed,
                       struct DygppLog **out);

// Write a log back out as CSV.
//
// # Safety
// `log` must be a live handle from this library; `path` a valid string.
int dygpp_log_write_csv(const struct DygppLog *log, const char *path);

// Number of events in the log; 0 for a null handle.
//
// # Safety
// `log` must be null or a live handle from this library.
uint64_t dygpp_log_events(const struct DygppLog *log);

// Number of distinct passengers; 0 for a null handle.
//
// # Safety
// `log` must be null or a live handle from this library.
uint32_t dygpp_log_passengers(const struct DygppLog *log);

// Number of distinct stations; 0 for a null handle.
//
// # Safety
// `log` must be null or a live handle from this library.
uint32_t dygpp_log_stations(const struct DygppLog *log);

// Release a log handle. Null is a no-op.
//
// # Safety
// `log` must be null or a handle not previously freed.
void dygpp_log_free(struct DygppLog *log);

// Load a trained checkpoint against a log, producing a predictor handle.
// `config_path` may be null to use built-in defaults; it must match the
// checkpoint's architecture.
//
// # Safety
// `log` must be a live handle; paths valid strings; `out` writable.
int dygpp_predictor_open(const struct DygppLog *log,
                         const char *config_path,
                         const char *ckpt_path,
                         struct DygppPredictor **out);

// Train a model on the log and return the resulting predictor. The best
// checkpoint is additionally written to `ckpt_out` unless it is null.
//
// # Safety
// `log` must be a live handle; paths valid strings or null; `out` writable.
int dygpp_predictor_train(const struct DygppLog *log,
                          const char *config_path,
                          const char *ckpt_out,
                          struct DygppPredictor **out);

// Probability that the passenger interacts with the station at `time`.
// Ids are the raw ids from the CSV.
//
// # Safety
// `predictor` must be a live handle; `out_probability` writable.
int dygpp_predict(const struct DygppPredictor *predictor,
                  uint64_t passenger,
                  uint64_t station,
                  int64_t time,
                  double *out_probability);

// Evaluate the model on a split ("test" or "val") and return the metrics
// as a JSON string (caller frees with `dygpp_string_free`).
//
// # Safety
// `predictor` must be a live handle; strings valid; `out_json` writable.
int dygpp_evaluate_json(const struct DygppPredictor *predictor,
                        const char *split,
                        const char *mode,
                        char **out_json);

// Evaluate a frequency baseline ("top" or "ptop") over the same split and
// negative sampling as the model, returning metrics JSON.
//
// # Safety
// `log` must be a live handle; strings valid; `out_json` writable.
int dygpp_baseline_json(const struct DygppLog *log,
                        const char *method,
                        const char *split,
                        const char *mode,
                        const char *config_path,
                        char **out_json);

// Release a string returned by this library. Null is a no-op.
//
// # Safety
// `s` must be null or a string returned by this library, freed once.
void dygpp_string_free(char *s);

// Release a predictor handle. Null is a no-op.
//
// # Safety
// `predictor` must be null or a handle not previously freed.
void dygpp_predictor_free(struct DygppPredictor *predictor);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYGPP_H */
