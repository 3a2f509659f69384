/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SCRUTINATOR_H
#define SCRUTINATOR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of a fallible call. The first four values match the command-line
 exit codes.
 */
typedef enum ScrStatus {
  SCR_STATUS_OK = 0,
  SCR_STATUS_USAGE = 1,
  SCR_STATUS_INPUT_FORMAT = 2,
  SCR_STATUS_INTERNAL = 3,
  SCR_STATUS_NULL_ARGUMENT = 4,
  SCR_STATUS_INVALID_UTF8 = 5,
  SCR_STATUS_PANIC = 6,
} ScrStatus;

typedef struct ScrAnalysis ScrAnalysis;

typedef struct ScrProfile ScrProfile;

typedef struct ScrTrace ScrTrace;

typedef struct ScrTrackers ScrTrackers;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version, a static NUL-terminated string.
 */
const char *scr_version(void);

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next `scr_*` call on the same thread.
 */
const char *scr_last_error_message(void);

/*
 Parses a device profile JSON document.

 # Safety
 `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum ScrStatus scr_profile_from_json(const char *json, struct ScrProfile **out);

/*
 # Safety
 `profile` must be NULL or a handle from [`scr_profile_from_json`] not yet freed.
 */
void scr_profile_free(struct ScrProfile *profile);

/*
 The tracker list shipped with the library.

 # Safety
 `out` must be a writable pointer.
 */
enum ScrStatus scr_trackers_bundled(struct ScrTrackers **out);

/*
 Parses a tracker list: one host per line, `#` comments.

 # Safety
 `list` must be a NUL-terminated string and `out` a writable pointer.
 */
enum ScrStatus scr_trackers_from_text(const char *list, struct ScrTrackers **out);

/*
 # Safety
 `trackers` must be NULL or a live tracker handle.
 */
void scr_trackers_free(struct ScrTrackers *trackers);

/*
 Parses an NDJSON trace from `len` bytes at `data`. Malformed lines are
 skipped and counted; see [`scr_trace_warning_count`].

 # Safety
 `data` must point to `len` readable bytes (it may be NULL when `len` is 0)
 and `out` must be a writable pointer.
 */
enum ScrStatus scr_trace_parse(const uint8_t *data, size_t len, struct ScrTrace **out);

/*
 Number of events in the trace; 0 for NULL.

 # Safety
 `trace` must be NULL or a live trace handle.
 */
size_t scr_trace_event_count(const struct ScrTrace *trace);

/*
 Number of lines skipped while parsing; 0 for NULL.

 # Safety
 `trace` must be NULL or a live trace handle.
 */
uint64_t scr_trace_warning_count(const struct ScrTrace *trace);

/*
 # Safety
 `trace` must be NULL or a live trace handle.
 */
void scr_trace_free(struct ScrTrace *trace);

/*
 Analyzes a trace. `trackers` may be NULL for the bundled list,
 `workers` 0 uses one thread per core and `max_depth` 0 keeps the default
 chain depth.

 # Safety
 `trace` and `profile` must be live handles, `trackers` NULL or a live
 handle, and `out` a writable pointer.
 */
enum ScrStatus scr_analyze(const struct ScrTrace *trace,
                           const struct ScrProfile *profile,
                           const struct ScrTrackers *trackers,
                           size_t workers,
                           size_t max_depth,
                           struct ScrAnalysis **out);

/*
 Total number of findings over all apps; 0 for NULL.

 # Safety
 `analysis` must be NULL or a live analysis handle.
 */
size_t scr_analysis_finding_count(const struct ScrAnalysis *analysis);

/*
 Per-app findings as a JSON document.

 # Safety
 `analysis` must be a live handle and `out` a writable pointer. The string
 written to `out` must be released with [`scr_string_free`].
 */
enum ScrStatus scr_analysis_to_json(const struct ScrAnalysis *analysis, char **out);

/*
 Aggregate statistics of an analysis as a JSON document.

 # Safety
 As for [`scr_analysis_to_json`].
 */
enum ScrStatus scr_stats_json(const struct ScrAnalysis *analysis, char **out);

/*
 # Safety
 `analysis` must be NULL or a live analysis handle.
 */
void scr_analysis_free(struct ScrAnalysis *analysis);

/*
 Releases a string returned by this library.

 # Safety
 `s` must be NULL or a string returned by an `scr_*` function and not yet
 freed.
 */
void scr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCRUTINATOR_H */
