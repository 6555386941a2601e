/* C interface to the walkpool link prediction library. */

#ifndef WALKPOOL_H
#define WALKPOOL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call in this ABI.
typedef enum WpStatus {
  WP_STATUS_OK = 0,
  // A required pointer argument was null.
  WP_STATUS_NULL_ARG = 1,
  // Argument values were rejected (unknown method, bad node ids,
  // wrong model kind).
  WP_STATUS_INVALID_ARG = 2,
  // The file could not be read or written.
  WP_STATUS_IO = 3,
  // The file was read but not understood.
  WP_STATUS_PARSE = 4,
  // The computation itself failed.
  WP_STATUS_COMPUTE = 5,
  // A bug: a panic crossed the boundary.
  WP_STATUS_INTERNAL = 6,
} WpStatus;

// An undirected graph handle.
typedef struct WpGraph WpGraph;

// A trained model handle.
typedef struct WpModel WpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the message for the most recent failure on this thread into
// `buf` (NUL-terminated, truncated to `cap` bytes including the NUL)
// and returns the full message length in bytes. `buf` may be null or
// `cap` zero to query the length alone.
//
// # Safety
// When `buf` is non-null it must point to `cap` writable bytes.
size_t wp_last_error_message(char *buf, size_t cap);

// Parses an edge-list file (one `u v` pair per line) into a new graph
// handle stored in `*out`. Node ids are remapped to a contiguous range
// exactly as the CLI does.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum WpStatus wp_graph_load(const char *path, struct WpGraph **out);

// Builds a graph from `num_pairs` edges given as interleaved
// `[u0, v0, u1, v1, ..]` node ids below `num_nodes`. Self-loops are
// rejected; duplicate edges collapse.
//
// # Safety
// `edges` must point to `2 * num_pairs` readable u64 values (null is
// accepted when `num_pairs` is zero) and `out` must be valid.
enum WpStatus wp_graph_build(uint64_t num_nodes,
                             const uint64_t *edges,
                             size_t num_pairs,
                             struct WpGraph **out);

// Releases a graph handle; null is a no-op.
//
// # Safety
// `g` must be a pointer from `wp_graph_load`/`wp_graph_build`, not yet
// freed.
void wp_graph_free(struct WpGraph *g);

// Number of nodes, or 0 for a null handle.
//
// # Safety
// `g` must be null or a live graph handle.
uint64_t wp_graph_num_nodes(const struct WpGraph *g);

// Number of undirected edges, or 0 for a null handle.
//
// # Safety
// `g` must be null or a live graph handle.
uint64_t wp_graph_edge_count(const struct WpGraph *g);

// Scores `num_pairs` node pairs with a heuristic named `method` (one
// of "cn", "aa", "katz", "pr") and writes one score per pair into
// `scores`. Pass non-finite or non-positive `beta`/`alpha`/`l_max` to
// use the defaults (beta 0.001, 32 walk lengths, alpha 0.85).
//
// # Safety
// `g` must be a live graph handle, `method` NUL-terminated, `pairs`
// readable for `2 * num_pairs` u64 values, and `scores` writable for
// `num_pairs` doubles.
enum WpStatus wp_heuristic_scores(const struct WpGraph *g,
                                  const char *method,
                                  const uint64_t *pairs,
                                  size_t num_pairs,
                                  double beta,
                                  uint64_t l_max,
                                  double alpha,
                                  double *scores);

// AUC of positive scores against negative scores (ties count half)
// written to `*out`.
//
// # Safety
// `pos` and `neg` must be readable for their counts; `out` must be
// valid.
enum WpStatus wp_auc(const double *pos,
                     size_t num_pos,
                     const double *neg,
                     size_t num_neg,
                     double *out);

// Loads a model checkpoint written by the trainer into `*out`.
// Checkpoints trained with file-based initial features are rejected
// here, since this ABI passes no embedding table.
//
// # Safety
// `path` must be NUL-terminated and `out` valid.
enum WpStatus wp_model_load(const char *path, struct WpModel **out);

// Releases a model handle; null is a no-op.
//
// # Safety
// `m` must be a pointer from `wp_model_load`, not yet freed.
void wp_model_free(struct WpModel *m);

// Link probability for each of `num_pairs` node pairs against the
// observed graph `g`, written into `scores`. Pairs may be existing
// edges or candidates; each is scored from its own enclosing subgraph
// exactly as during training.
//
// # Safety
// `m` and `g` must be live handles, `pairs` readable for
// `2 * num_pairs` u64 values, `scores` writable for `num_pairs`
// doubles.
enum WpStatus wp_model_predict(const struct WpModel *m,
                               const struct WpGraph *g,
                               const uint64_t *pairs,
                               size_t num_pairs,
                               double *scores);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WALKPOOL_H */
