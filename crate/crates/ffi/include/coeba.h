#ifndef COEBA_H
#define COEBA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum CoebaStatus {
  COEBA_STATUS_OK = 0,
  COEBA_STATUS_NULL_POINTER = 1,
  COEBA_STATUS_INVALID_STRING = 2,
  COEBA_STATUS_CONFIG = 3,
  COEBA_STATUS_PARSE = 4,
  COEBA_STATUS_IO = 5,
  COEBA_STATUS_SHAPE = 6,
  COEBA_STATUS_DATA = 7,
  COEBA_STATUS_NUMERIC = 8,
  COEBA_STATUS_TRAINING = 9,
  COEBA_STATUS_CHECKPOINT = 10,
  COEBA_STATUS_BUFFER_TOO_SMALL = 11,
  COEBA_STATUS_PANIC = 12,
} CoebaStatus;

/**
 * Experiment configuration.
 */
typedef struct CoebaConfig CoebaConfig;

/**
 * Undirected graph with node features.
 */
typedef struct CoebaGraph CoebaGraph;

/**
 * Trained encoder.
 */
typedef struct CoebaModel CoebaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *coeba_last_error(void);

/**
 * Library version as a static string.
 */
const char *coeba_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void coeba_string_free(char *s);

/**
 * Loads a graph from an edge-list file and a feature file.
 *
 * # Safety
 * Paths must be nul-terminated strings; `out` must be writable.
 */
enum CoebaStatus coeba_graph_load(const char *edges_path,
                                  const char *features_path,
                                  struct CoebaGraph **out);

/**
 * Builds a graph from `n_edges` pairs `(src[i], dst[i])` and a row-major
 * `n_nodes x feature_dim` feature matrix.
 *
 * # Safety
 * Arrays must hold the stated number of elements; `out` must be writable.
 */
enum CoebaStatus coeba_graph_new(size_t n_nodes,
                                 const size_t *src,
                                 const size_t *dst,
                                 size_t n_edges,
                                 const double *features,
                                 size_t feature_dim,
                                 struct CoebaGraph **out);

/**
 * # Safety
 * `g` must be null or a handle from this library, not used afterwards.
 */
void coeba_graph_free(struct CoebaGraph *g);

/**
 * Writes a graph in the formats [`coeba_graph_load`] reads.
 *
 * # Safety
 * `g` must be a valid handle; paths must be nul-terminated strings.
 */
enum CoebaStatus coeba_graph_save(const struct CoebaGraph *g,
                                  const char *edges_path,
                                  const char *features_path);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a valid handle.
 */
size_t coeba_graph_num_nodes(const struct CoebaGraph *g);

/**
 * Number of undirected edges, or 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a valid handle.
 */
size_t coeba_graph_num_edges(const struct CoebaGraph *g);

/**
 * Smallest node degree, or 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a valid handle.
 */
size_t coeba_graph_min_degree(const struct CoebaGraph *g);

/**
 * Copies the edges as `(src[i], dst[i])` with `src[i] < dst[i]`.
 *
 * # Safety
 * `src` and `dst` must each have room for `capacity` elements.
 */
enum CoebaStatus coeba_graph_edges(const struct CoebaGraph *g,
                                   size_t *src,
                                   size_t *dst,
                                   size_t capacity);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be writable.
 */
enum CoebaStatus coeba_config_new(struct CoebaConfig **out);

/**
 * Reads a `key = value` configuration file.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum CoebaStatus coeba_config_load(const char *path, struct CoebaConfig **out);

/**
 * # Safety
 * `c` must be null or a handle from this library, not used afterwards.
 */
void coeba_config_free(struct CoebaConfig *c);

/**
 * Sets one key, e.g. `"eba.r_m"` to `"0.2"`.
 *
 * # Safety
 * `c` must be a valid handle; `key` and `value` nul-terminated strings.
 */
enum CoebaStatus coeba_config_set(struct CoebaConfig *c, const char *key, const char *value);

/**
 * Current value of a key as a newly allocated string.
 *
 * # Safety
 * `c` must be a valid handle; `key` a nul-terminated string; `out` writable.
 */
enum CoebaStatus coeba_config_get(const struct CoebaConfig *c, const char *key, char **out);

/**
 * Runs the configured experiment over all splits and returns the report as JSON.
 *
 * # Safety
 * Handles must be valid; `out_json` must be writable.
 */
enum CoebaStatus coeba_run_experiment(const struct CoebaGraph *g,
                                      const struct CoebaConfig *c,
                                      char **out_json);

/**
 * Trains on every edge of `g` without held-out data and returns the final encoder.
 *
 * # Safety
 * Handles must be valid; `out` must be writable.
 */
enum CoebaStatus coeba_train(const struct CoebaGraph *g,
                             const struct CoebaConfig *c,
                             struct CoebaModel **out);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum CoebaStatus coeba_model_load(const char *path, struct CoebaModel **out);

/**
 * # Safety
 * `m` must be a valid handle; `path` a nul-terminated string.
 */
enum CoebaStatus coeba_model_save(const struct CoebaModel *m, const char *path);

/**
 * # Safety
 * `m` must be null or a handle from this library, not used afterwards.
 */
void coeba_model_free(struct CoebaModel *m);

/**
 * Embedding dimension, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a valid handle.
 */
size_t coeba_model_embedding_dim(const struct CoebaModel *m);

/**
 * Writes the row-major `num_nodes x embedding_dim` embedding matrix.
 *
 * # Safety
 * Handles must be valid; `out` must have room for `capacity` doubles.
 */
enum CoebaStatus coeba_model_embed(const struct CoebaModel *m,
                                   const struct CoebaGraph *g,
                                   double *out,
                                   size_t capacity);

/**
 * Link probabilities of the pairs `(src[i], dst[i])`.
 *
 * # Safety
 * Handles must be valid; all arrays must hold `n_pairs` elements.
 */
enum CoebaStatus coeba_model_score(const struct CoebaModel *m,
                                   const struct CoebaGraph *g,
                                   const size_t *src,
                                   const size_t *dst,
                                   size_t n_pairs,
                                   double *out);

/**
 * Builds an augmented view of `g` from the model's embeddings, using the
 * configuration's removal, addition and masking ratios.
 *
 * # Safety
 * Handles must be valid; `out` must be writable.
 */
enum CoebaStatus coeba_augment(const struct CoebaGraph *g,
                               const struct CoebaModel *m,
                               const struct CoebaConfig *c,
                               uint64_t seed,
                               struct CoebaGraph **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COEBA_H */
