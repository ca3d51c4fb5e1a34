/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SYMRED_H
#define SYMRED_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a call.
typedef enum SymredStatus {
  SYMRED_STATUS_OK = 0,
  // The pipeline ran and at least one check failed; the outcome is set.
  SYMRED_STATUS_CHECK_FAILED = 1,
  // The scene or the request is invalid.
  SYMRED_STATUS_INVALID_INPUT = 2,
  SYMRED_STATUS_NULL_POINTER = 3,
  SYMRED_STATUS_INVALID_UTF8 = 4,
  // An internal panic was caught at the boundary.
  SYMRED_STATUS_PANIC = 5,
} SymredStatus;

// The report of a pipeline run with the scenes it produced.
typedef struct SymredOutcome SymredOutcome;

// A validated scene.
typedef struct SymredScene SymredScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into the library on this thread.
const char *symred_last_error(void);

// Library version as a static NUL-terminated string.
const char *symred_version(void);

// Parse and validate a scene from JSON text.
//
// # Safety
// `json` must be NULL or a NUL-terminated string; `out` must be NULL or
// point to writable storage for one pointer.
enum SymredStatus symred_scene_from_json(const char *json, struct SymredScene **out);

// Serialize a scene to JSON; free the result with `symred_string_free`.
// Returns NULL if `scene` is NULL.
//
// # Safety
// `scene` must be NULL or a live handle.
char *symred_scene_to_json(const struct SymredScene *scene);

// Override the sampling seed.
//
// # Safety
// `scene` must be NULL or a live handle.
enum SymredStatus symred_scene_set_seed(struct SymredScene *scene, uint64_t seed);

// Override the tolerance of every adjustable check; must be positive.
//
// # Safety
// `scene` must be NULL or a live handle.
enum SymredStatus symred_scene_set_tolerance(struct SymredScene *scene, double tol);

// Dimension of the scene's chart, or 0 for NULL.
//
// # Safety
// `scene` must be NULL or a live handle.
size_t symred_scene_dim(const struct SymredScene *scene);

// # Safety
// `scene` must be NULL or a handle not yet freed.
void symred_scene_free(struct SymredScene *scene);

// Check the form and connection of a scene.
//
// # Safety
// `scene` must be NULL or a live handle; `out` must be NULL or writable.
enum SymredStatus symred_check(const struct SymredScene *scene, struct SymredOutcome **out);

// Lift the base connection to the cotangent bundle, optionally
// symmetrized and corrected against the canonical form.
//
// # Safety
// As for `symred_check`.
enum SymredStatus symred_lift(const struct SymredScene *scene,
                              bool symplectify,
                              struct SymredOutcome **out);

// Reduce to the quotient of a moment-map level set.
//
// # Safety
// As for `symred_check`.
enum SymredStatus symred_reduce(const struct SymredScene *scene, struct SymredOutcome **out);

// Build a presymplectic connection, optionally reduced to the leaf space.
//
// # Safety
// As for `symred_check`.
enum SymredStatus symred_presymplectic(const struct SymredScene *scene,
                                       bool reduce,
                                       struct SymredOutcome **out);

// Whether every check passed; false for NULL.
//
// # Safety
// `outcome` must be NULL or a live handle.
bool symred_outcome_passed(const struct SymredOutcome *outcome);

// `{"report": …, "scene": …, "quotient": …}` as JSON; free with
// `symred_string_free`.
//
// # Safety
// `outcome` must be NULL or a live handle.
char *symred_outcome_to_json(const struct SymredOutcome *outcome);

// Human-readable report; free with `symred_string_free`.
//
// # Safety
// `outcome` must be NULL or a live handle.
char *symred_outcome_report_text(const struct SymredOutcome *outcome);

// A new handle to the scene the pipeline produced, or NULL if none.
//
// # Safety
// `outcome` must be NULL or a live handle.
struct SymredScene *symred_outcome_scene(const struct SymredOutcome *outcome);

// A new handle to the reduced scene, or NULL if none.
//
// # Safety
// `outcome` must be NULL or a live handle.
struct SymredScene *symred_outcome_quotient(const struct SymredOutcome *outcome);

// # Safety
// `outcome` must be NULL or a handle not yet freed.
void symred_outcome_free(struct SymredOutcome *outcome);

// # Safety
// `s` must be NULL or a string returned by this library and not yet freed.
void symred_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYMRED_H */
