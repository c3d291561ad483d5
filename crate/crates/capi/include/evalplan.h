#ifndef EVALPLAN_H
#define EVALPLAN_H

/* Generated by cbindgen from evalplan-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every API call.
 */
typedef enum EpStatus {
  EP_STATUS_OK = 0,
  /**
   * The input text did not parse; see `ep_last_error`.
   */
  EP_STATUS_PARSE_ERROR = 1,
  /**
   * No admissible plan exists for the given constraints.
   */
  EP_STATUS_UNSAT = 2,
  /**
   * The plan is not wellformed or not admissible for the program.
   */
  EP_STATUS_NOT_ADMISSIBLE = 3,
  /**
   * A null pointer, bad UTF-8, or an otherwise invalid argument.
   */
  EP_STATUS_INVALID_ARGUMENT = 4,
  /**
   * Evaluation failed (e.g. the program is not stratifiable).
   */
  EP_STATUS_EVAL_ERROR = 5,
  /**
   * An internal invariant failed; see `ep_last_error`.
   */
  EP_STATUS_INTERNAL_ERROR = 6,
} EpStatus;

/**
 * Opaque evaluation plan handle.
 */
typedef struct EpPlan EpPlan;

/**
 * Opaque parsed program handle.
 */
typedef struct EpProgram EpProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * A message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread; do not free.
 */
const char *ep_last_error(void);

/**
 * The crate version as a static string; do not free.
 */
const char *ep_version(void);

/**
 * Parses Datalog text into a program handle. With `allow_negation` the full
 * profile (stratified negation) is accepted; otherwise only positive rules
 * parse, as the planner requires.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum EpStatus ep_program_parse(const char *text, bool allow_negation, struct EpProgram **out);

/**
 * Frees a program handle; a null pointer is ignored.
 *
 * # Safety
 * `program` must have come from `ep_program_parse` and not be freed twice.
 */
void ep_program_free(struct EpProgram *program);

/**
 * Frees a plan handle; a null pointer is ignored.
 *
 * # Safety
 * `plan` must have come from this library and not be freed twice.
 */
void ep_plan_free(struct EpPlan *plan);

/**
 * Frees a string returned through any `char **` out-parameter.
 *
 * # Safety
 * `s` must have been returned by this library and not be freed twice.
 */
void ep_string_free(char *s);

/**
 * Computes an optimal evaluation plan. `strategy` is a comma list such as
 * `"w1,w2,w3,w4"`, a preset name (`"sigma1"`, `"sigma2"`), or null for the
 * default; `constraints` is optional constraint-fact text (`relation/2`,
 * `index/3`, `key/2`, `fixedIndex/2`, `fixedPosition/3`).
 *
 * # Safety
 * All pointers must be valid; string arguments NUL-terminated.
 */
enum EpStatus ep_plan_compute(const struct EpProgram *program,
                              const char *strategy,
                              const char *constraints,
                              struct EpPlan **out);

/**
 * Parses a plan file (the `schema`/`order` line format) against a program.
 *
 * # Safety
 * All pointers must be valid; `text` NUL-terminated.
 */
enum EpStatus ep_plan_parse(const struct EpProgram *program, const char *text, struct EpPlan **out);

/**
 * Serializes a plan in the plan-file format.
 *
 * # Safety
 * All pointers must be valid.
 */
enum EpStatus ep_plan_render(const struct EpProgram *program,
                             const struct EpPlan *plan,
                             char **out);

/**
 * Checks wellformedness and admissibility. Returns `Ok` for an admissible
 * plan, `NotAdmissible` otherwise; the verdict report (one line per rule)
 * is written to `report` when it is non-null.
 *
 * # Safety
 * `program` and `plan` must be valid handles.
 */
enum EpStatus ep_plan_check(const struct EpProgram *program,
                            const struct EpPlan *plan,
                            char **report);

/**
 * Emits the solver-facing fact stream for the program (optionally with a
 * strategy and constraint facts, as in `ep_plan_compute`).
 *
 * # Safety
 * All pointers must be valid; string arguments NUL-terminated.
 */
enum EpStatus ep_emit_facts(const struct EpProgram *program,
                            const char *strategy,
                            const char *constraints,
                            char **out);

/**
 * Renders the program annotated with the plan's order and index directives.
 *
 * # Safety
 * All pointers must be valid.
 */
enum EpStatus ep_annotate(const struct EpProgram *program, const struct EpPlan *plan, char **out);

/**
 * Evaluates the program. With a plan the engine follows it; with a null
 * plan the per-rule baseline policy applies. `query` selects one relation
 * to print as fact lines (`"t/2"`); null prints per-relation counts.
 * `metrics_json`, when non-null, receives the evaluation metrics as JSON.
 *
 * # Safety
 * All pointers must be valid; string arguments NUL-terminated.
 */
enum EpStatus ep_evaluate(const struct EpProgram *program,
                          const struct EpPlan *plan,
                          const char *query,
                          char **result,
                          char **metrics_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVALPLAN_H */
