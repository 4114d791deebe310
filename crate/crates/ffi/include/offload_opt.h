#ifndef OFFLOAD_OPT_H
#define OFFLOAD_OPT_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result of every fallible call.
 */
typedef enum OffloadStatus {
  OFFLOAD_STATUS_OK = 0,
  /*
   Malformed or invalid input (graph, profile, plan or argument).
   */
  OFFLOAD_STATUS_INVALID_INPUT = 1,
  /*
   No plan meets the constraints, or the plan cannot finish.
   */
  OFFLOAD_STATUS_INFEASIBLE = 2,
  /*
   The graph shape is not supported by the requested solver.
   */
  OFFLOAD_STATUS_UNSUPPORTED = 3,
  OFFLOAD_STATUS_NULL_POINTER = 4,
  /*
   A Rust panic was caught at the boundary.
   */
  OFFLOAD_STATUS_INTERNAL = 5,
} OffloadStatus;

/*
 Opaque call graph.
 */
typedef struct OffloadGraph OffloadGraph;

/*
 Opaque offloading plan.
 */
typedef struct OffloadPlan OffloadPlan;

/*
 Opaque platform profile.
 */
typedef struct OffloadProfile OffloadProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. Valid until the
 next call on the same thread; do not free.
 */
const char *offload_last_error(void);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and not be freed twice.
 */
void offload_string_free(char *s);

/*
 Parses a graph from JSON text. The graph is checked for validity.

 # Safety
 `json` must be a nul-terminated string; `out` must be writable.
 */
enum OffloadStatus offload_graph_from_json(const char *json, struct OffloadGraph **out);

/*
 Loads and validates a graph file.

 # Safety
 `path` must be a nul-terminated string; `out` must be writable.
 */
enum OffloadStatus offload_graph_load(const char *path, struct OffloadGraph **out);

/*
 Number of nodes, or 0 for NULL.

 # Safety
 `graph` must be NULL or a live handle.
 */
uintptr_t offload_graph_node_count(const struct OffloadGraph *graph);

/*
 # Safety
 `graph` must be NULL or a handle not yet freed.
 */
void offload_graph_free(struct OffloadGraph *graph);

/*
 Parses a platform profile from JSON text.

 # Safety
 `json` must be a nul-terminated string; `out` must be writable.
 */
enum OffloadStatus offload_profile_from_json(const char *json, struct OffloadProfile **out);

/*
 Loads a platform profile file.

 # Safety
 `path` must be a nul-terminated string; `out` must be writable.
 */
enum OffloadStatus offload_profile_load(const char *path, struct OffloadProfile **out);

/*
 The built-in default profile.

 # Safety
 `out` must be writable.
 */
enum OffloadStatus offload_profile_default(struct OffloadProfile **out);

/*
 # Safety
 `profile` must be NULL or a handle not yet freed.
 */
void offload_profile_free(struct OffloadProfile *profile);

/*
 Parses a plan (`{"decisions": {...}, "powers": {...}}`) for `graph`.

 # Safety
 `graph` must be a live handle, `json` a nul-terminated string and `out`
 writable.
 */
enum OffloadStatus offload_plan_from_json(const struct OffloadGraph *graph,
                                          const char *json,
                                          struct OffloadPlan **out);

/*
 Serializes a plan to JSON. Free the result with `offload_string_free`.

 # Safety
 `plan` must be a live handle and `out` writable.
 */
enum OffloadStatus offload_plan_to_json(const struct OffloadPlan *plan, char **out);

/*
 Whether node `id` (1-based) runs remotely.

 # Safety
 `plan` must be a live handle and `out` writable.
 */
enum OffloadStatus offload_plan_is_offloaded(const struct OffloadPlan *plan,
                                             uint32_t id,
                                             bool *out);

/*
 # Safety
 `plan` must be NULL or a handle not yet freed.
 */
void offload_plan_free(struct OffloadPlan *plan);

/*
 Minimizes E + lambda L under serial execution. `out_objective` may be
 NULL.

 # Safety
 Handles must be live; `out_plan` must be writable.
 */
enum OffloadStatus offload_solve_serial(const struct OffloadGraph *graph,
                                        const struct OffloadProfile *profile,
                                        double lambda,
                                        struct OffloadPlan **out_plan,
                                        double *out_objective);

/*
 Minimum planning energy subject to latency <= `lmax` under parallel
 execution with `conc` concurrent streams and tasks of each kind, on a
 grid of step `eps`. `out_energy` may be NULL.

 # Safety
 Handles must be live; `out_plan` must be writable.
 */
enum OffloadStatus offload_solve_parallel(const struct OffloadGraph *graph,
                                          const struct OffloadProfile *profile,
                                          uint32_t conc,
                                          double lmax,
                                          double eps,
                                          struct OffloadPlan **out_plan,
                                          double *out_energy);

/*
 Energy and latency of a plan under serial execution.

 # Safety
 Handles must be live; out-pointers must be writable.
 */
enum OffloadStatus offload_evaluate_serial(const struct OffloadGraph *graph,
                                           const struct OffloadProfile *profile,
                                           const struct OffloadPlan *plan,
                                           double *out_energy,
                                           double *out_latency);

/*
 Completion time of the root under parallel execution; +inf when an
 uplink has zero power.

 # Safety
 Handles must be live; `out_latency` must be writable.
 */
enum OffloadStatus offload_latency_recursion(const struct OffloadGraph *graph,
                                             const struct OffloadProfile *profile,
                                             const struct OffloadPlan *plan,
                                             uint32_t conc,
                                             double *out_latency);

/*
 Fixed-step simulation of the plan; energy and latency upper bounds.

 # Safety
 Handles must be live; out-pointers must be writable.
 */
enum OffloadStatus offload_simulate(const struct OffloadGraph *graph,
                                    const struct OffloadProfile *profile,
                                    const struct OffloadPlan *plan,
                                    double eps_d,
                                    double *out_energy,
                                    double *out_latency);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OFFLOAD_OPT_H */
