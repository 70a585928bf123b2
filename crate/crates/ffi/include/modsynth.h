#ifndef MODSYNTH_H
#define MODSYNTH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Synthesis strategy for [`ms_solve`].
 */
typedef enum ms_mode {
  MS_MODE_COMPOSITIONAL = 0,
  MS_MODE_MONOLITHIC = 1,
} ms_mode;

/**
 * Result codes. Values are stable.
 */
typedef enum ms_status {
  MS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MS_STATUS_NULL_ARGUMENT = 1,
  /**
   * Text was not valid UTF-8.
   */
  MS_STATUS_INVALID_UTF8 = 2,
  /**
   * Input text or a benchmark spec failed to parse or validate.
   */
  MS_STATUS_INVALID_INPUT = 3,
  /**
   * A composition exceeded the state budget.
   */
  MS_STATUS_BUDGET = 4,
  /**
   * The engine panicked or broke an internal contract.
   */
  MS_STATUS_INTERNAL = 5,
} ms_status;

/**
 * Opaque parsed control problem.
 */
typedef struct ms_problem ms_problem;

/**
 * Opaque synthesis result.
 */
typedef struct ms_solution ms_solution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ms_last_error(void);

/**
 * Parses a problem from NUL-terminated text.
 *
 * # Safety
 * `src` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum ms_status ms_problem_parse(const char *src, struct ms_problem **out);

/**
 * Builds a benchmark problem from a spec such as `dp:3` or `tl:2:2`.
 *
 * # Safety
 * `spec` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum ms_status ms_problem_generate(const char *spec, struct ms_problem **out);

/**
 * Prints the problem back to text. Free the result with [`ms_string_free`].
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
char *ms_problem_print(const struct ms_problem *problem);

/**
 * Number of components of the plant, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t ms_problem_part_count(const struct ms_problem *problem);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void ms_problem_free(struct ms_problem *problem);

/**
 * Solves `problem`. An unrealizable problem still yields `Ok` and a solution
 * whose [`ms_solution_is_realizable`] is false. `budget` of 0 selects the
 * default.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum ms_status ms_solve(const struct ms_problem *problem,
                        enum ms_mode mode,
                        size_t budget,
                        struct ms_solution **out);

/**
 * # Safety
 * `sol` must be null or a live handle.
 */
bool ms_solution_is_realizable(const struct ms_solution *sol);

/**
 * # Safety
 * `sol` must be null or a live handle.
 */
size_t ms_solution_controller_count(const struct ms_solution *sol);

/**
 * Largest LTS the run synthesized over.
 *
 * # Safety
 * `sol` must be null or a live handle.
 */
size_t ms_solution_max_states(const struct ms_solution *sol);

/**
 * Controllers in the text format, or null when unrealizable. Free the
 * result with [`ms_string_free`].
 *
 * # Safety
 * `sol` must be null or a live handle.
 */
char *ms_solution_controllers(const struct ms_solution *sol);

/**
 * # Safety
 * `sol` must be null or a handle not yet freed.
 */
void ms_solution_free(struct ms_solution *sol);

/**
 * Checks controllers given as text against `problem`; `*ok` receives the
 * verdict.
 *
 * # Safety
 * `problem` must be a live handle, `controllers` a valid NUL-terminated
 * string and `ok` a valid pointer.
 */
enum ms_status ms_verify(const struct ms_problem *problem, const char *controllers, bool *ok);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void ms_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODSYNTH_H */
