/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef HETGNN_H
#define HETGNN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum HgStatus {
  HG_STATUS_OK = 0,
  HG_STATUS_NULL_ARGUMENT = 1,
  HG_STATUS_INVALID_UTF8 = 2,
  HG_STATUS_INVALID_ARGUMENT = 3,
  HG_STATUS_IO = 4,
  HG_STATUS_VALIDATION = 5,
  HG_STATUS_DATA = 6,
  HG_STATUS_SHAPE = 7,
  HG_STATUS_MANIFEST = 8,
  HG_STATUS_CHECKPOINT = 9,
  HG_STATUS_RUNTIME = 10,
  HG_STATUS_BUFFER_TOO_SMALL = 11,
  HG_STATUS_PANIC = 12,
} HgStatus;

/**
 * Per-node-type embedding matrices in global id order.
 */
typedef struct HgEmbeddings HgEmbeddings;

/**
 * A partitioned graph loaded from its manifest.
 */
typedef struct HgGraph HgGraph;

/**
 * A trained or restored model, with the report of the run that produced it.
 */
typedef struct HgModel HgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next `hg_*` call on the same thread.
 */
const char *hg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hg_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void hg_string_free(char *s);

/**
 * Builds the graph described by the schema at `schema_path` (input files
 * are resolved against its directory), splits it into `num_partitions`
 * random partitions and writes them with `<graph_name>.json` under
 * `output_dir`.
 *
 * # Safety
 * String arguments must be valid NUL-terminated strings.
 */
enum HgStatus hg_gconstruct(const char *schema_path,
                            const char *output_dir,
                            const char *graph_name,
                            size_t num_partitions,
                            uint64_t seed);

/**
 * Loads every partition listed in a partition manifest.
 *
 * # Safety
 * `manifest_path` must be a valid string; `out` must be writable.
 */
enum HgStatus hg_graph_open(const char *manifest_path, struct HgGraph **out);

/**
 * # Safety
 * `graph` must come from `hg_graph_open` and not be freed twice.
 */
void hg_graph_free(struct HgGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum HgStatus hg_graph_num_partitions(const struct HgGraph *graph, size_t *out);

/**
 * Number of nodes of the named node type.
 *
 * # Safety
 * `graph` must be a live handle, `node_type` a valid string, `out` writable.
 */
enum HgStatus hg_graph_num_nodes(const struct HgGraph *graph, const char *node_type, size_t *out);

/**
 * Trains with the JSON training config at `config_path`, one in-process
 * worker per partition (the config's `num_workers` is overridden).
 *
 * # Safety
 * `graph` must be a live handle, `config_path` a valid string, `out` writable.
 */
enum HgStatus hg_train(const struct HgGraph *graph, const char *config_path, struct HgModel **out);

/**
 * Restores a model checkpoint directory.
 *
 * # Safety
 * `dir` must be a valid string; `out` must be writable.
 */
enum HgStatus hg_model_load(const char *dir, struct HgModel **out);

/**
 * Writes the model checkpoint to `dir`.
 *
 * # Safety
 * `model` must be a live handle and `dir` a valid string.
 */
enum HgStatus hg_model_save(const struct HgModel *model, const char *dir);

/**
 * The training report as JSON, or null for a restored model. Free the
 * result with `hg_string_free`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum HgStatus hg_model_report_json(const struct HgModel *model, char **out);

/**
 * # Safety
 * `model` must come from this library and not be freed twice.
 */
void hg_model_free(struct HgModel *model);

/**
 * Full-neighbor embeddings of every node. Validation and test link
 * prediction edges are hidden when `exclude_eval_edges` is true. Models
 * trained on constructed features get them rebuilt first.
 *
 * # Safety
 * `graph` and `model` must be live handles; `out` must be writable.
 */
enum HgStatus hg_infer(const struct HgGraph *graph,
                       const struct HgModel *model,
                       bool exclude_eval_edges,
                       struct HgEmbeddings **out);

/**
 * Rows and columns of one node type's embedding matrix.
 *
 * # Safety
 * `emb` must be a live handle, `node_type` a valid string, outputs writable.
 */
enum HgStatus hg_embeddings_shape(const struct HgEmbeddings *emb,
                                  const char *node_type,
                                  size_t *rows,
                                  size_t *cols);

/**
 * Copies one node type's embeddings, row-major, into `buf` of `len`
 * doubles. Fails with `BufferTooSmall` when `len < rows * cols`.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum HgStatus hg_embeddings_copy(const struct HgEmbeddings *emb,
                                 const char *node_type,
                                 double *buf,
                                 size_t len);

/**
 * # Safety
 * `emb` must come from `hg_infer` and not be freed twice.
 */
void hg_embeddings_free(struct HgEmbeddings *emb);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HETGNN_H */
