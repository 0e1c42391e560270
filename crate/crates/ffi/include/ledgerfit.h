#ifndef LEDGERFIT_H
#define LEDGERFIT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LfStatus {
  LF_STATUS_OK = 0,
  LF_STATUS_NULL_ARGUMENT = 1,
  LF_STATUS_INVALID_UTF8 = 2,
  LF_STATUS_PARSE = 3,
  LF_STATUS_INVALID = 4,
  LF_STATUS_NOT_FOUND = 5,
  LF_STATUS_VERSION_CONFLICT = 6,
  LF_STATUS_INELIGIBLE = 7,
  LF_STATUS_GATED = 8,
  LF_STATUS_VALIDATION = 9,
  LF_STATUS_INTERNAL = 10,
} LfStatus;

/**
 * Report encoding for [`lf_report`].
 */
typedef enum LfReportFormat {
  LF_REPORT_FORMAT_JSON = 0,
  LF_REPORT_FORMAT_MARKDOWN = 1,
} LfReportFormat;

/**
 * Opaque catalog handle.
 */
typedef struct LfCatalog LfCatalog;

/**
 * Opaque session handle. Keeps its catalog alive.
 */
typedef struct LfSession LfSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library from the same thread.
 */
const char *lf_last_error_message(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void lf_string_free(char *s);

/**
 * Loads the bundled catalog.
 *
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum LfStatus lf_catalog_load_default(struct LfCatalog **out);

/**
 * Parses a catalog document. Structural problems fail with `Parse`; use
 * [`lf_catalog_validate_jsonl`] for the full lint.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LfStatus lf_catalog_parse(const char *json, struct LfCatalog **out);

/**
 * # Safety
 * `catalog` must be null or a handle from this library not yet freed.
 */
void lf_catalog_free(struct LfCatalog *catalog);

/**
 * Content hash of the catalog as lowercase hex.
 *
 * # Safety
 * `catalog` must be a live handle and `out` a valid pointer.
 */
enum LfStatus lf_catalog_hash(const struct LfCatalog *catalog, char **out);

/**
 * Writes validation diagnostics as JSON lines to `out`. Returns `Invalid`
 * when any diagnostic is an error; `out` is filled either way.
 *
 * # Safety
 * `catalog` must be a live handle and `out` a valid pointer.
 */
enum LfStatus lf_catalog_validate_jsonl(const struct LfCatalog *catalog, char **out);

/**
 * Starts an empty session pinned to `catalog`.
 *
 * # Safety
 * `catalog` must be a live handle, `name` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum LfStatus lf_session_new(const struct LfCatalog *catalog,
                             const char *name,
                             struct LfSession **out);

/**
 * Restores a session document produced by [`lf_session_to_json`].
 *
 * # Safety
 * `catalog` must be a live handle, `json` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum LfStatus lf_session_from_json(const struct LfCatalog *catalog,
                                   const char *json,
                                   struct LfSession **out);

/**
 * # Safety
 * `session` must be a live handle and `out` a valid pointer.
 */
enum LfStatus lf_session_to_json(const struct LfSession *session, char **out);

/**
 * # Safety
 * `session` must be null or a handle from this library not yet freed.
 */
void lf_session_free(struct LfSession *session);

/**
 * Current session version, or 0 for a null handle.
 *
 * # Safety
 * `session` must be null or a live handle.
 */
uint64_t lf_session_version(const struct LfSession *session);

/**
 * Records `option_id` for `question_id`. Fails with `VersionConflict` when
 * `expected_version` is not the current version.
 *
 * # Safety
 * `session` must be a live handle; the ids must be NUL-terminated strings.
 */
enum LfStatus lf_session_answer(struct LfSession *session,
                                const char *question_id,
                                const char *option_id,
                                uint64_t expected_version);

/**
 * # Safety
 * `session` must be a live handle and `question_id` a NUL-terminated string.
 */
enum LfStatus lf_session_retract(struct LfSession *session,
                                 const char *question_id,
                                 uint64_t expected_version);

/**
 * Records the proceed-despite-not-suitable override. `note` may be null.
 *
 * # Safety
 * `session` must be a live handle; `note` must be null or NUL-terminated.
 */
enum LfStatus lf_session_override(struct LfSession *session,
                                  const char *note,
                                  uint64_t expected_version);

/**
 * Suitability verdict as JSON.
 *
 * # Safety
 * `session` must be a live handle and `out` a valid pointer.
 */
enum LfStatus lf_session_verdict_json(const struct LfSession *session, char **out);

/**
 * Access-model recommendation as JSON.
 *
 * # Safety
 * `session` must be a live handle and `out` a valid pointer.
 */
enum LfStatus lf_session_recommendation_json(const struct LfSession *session, char **out);

/**
 * Full decision report with all three views, byte-identical to the CLI
 * and HTTP exports.
 *
 * # Safety
 * `session` must be a live handle and `out` a valid pointer.
 */
enum LfStatus lf_report(const struct LfSession *session, enum LfReportFormat format, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEDGERFIT_H */
