/*
 * ebert -- C API for the e-commerce pre-training pipeline.
 *
 * All functions return ebert_status; on failure the thread-local message
 * from ebert_last_error() describes what went wrong. Pointers returned
 * through char** are owned by the caller and released with
 * ebert_string_free(). Opaque handles are released with their _close()
 * function.
 */
#ifndef EBERT_H
#define EBERT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef EBERT_API
#define EBERT_API __attribute__((visibility("default")))
#endif

typedef enum ebert_status {
  EBERT_OK = 0,
  EBERT_E_INVALID = 1,  /* bad argument or precondition */
  EBERT_E_IO = 2,       /* file missing or unreadable/unwritable */
  EBERT_E_DATA = 3,     /* malformed corpus, pool, graph or config */
  EBERT_E_NUMERIC = 4,  /* non-finite value during training */
  EBERT_E_INTERNAL = 5
} ebert_status;

EBERT_API const char* ebert_version(void);

/* Message for the most recent failure on this thread. */
EBERT_API const char* ebert_last_error(void);

EBERT_API void ebert_string_free(char* s);

/* ---- vocabulary ---- */

/* Builds a vocabulary from product and/or review TSVs (either path may be
 * NULL) and writes it to out_path. *out_size receives the vocabulary size
 * including the 5 specials. */
EBERT_API ebert_status ebert_build_vocab(const char* products_tsv, const char* reviews_tsv, long min_freq,
                                         long max_size, const char* out_path, long* out_size);

/* ---- phrase pool ---- */

/* Mines scored phrases from the corpora. filter_threshold < 0 skips the
 * quality filter; the pipeline default keeps score >= 0.5. */
EBERT_API ebert_status ebert_mine_phrases(const char* products_tsv, const char* reviews_tsv, long max_len,
                                          long min_count, double filter_threshold, const char* out_path,
                                          long* out_size);

/* Imports an externally mined pool (phrase<TAB>score). Phrases outside the
 * 2..6 token range are skipped and counted in *out_skipped. */
EBERT_API ebert_status ebert_import_phrases(const char* in_tsv, double filter_threshold, const char* out_path,
                                            long* out_size, long* out_skipped);

typedef struct ebert_pool ebert_pool;

EBERT_API ebert_status ebert_pool_open(const char* pool_tsv, ebert_pool** out);
EBERT_API void ebert_pool_close(ebert_pool* pool);
EBERT_API long ebert_pool_size(const ebert_pool* pool);
EBERT_API double ebert_pool_min_score(const ebert_pool* pool);

/* Leftmost-longest matches of pool phrases in one line of raw text.
 * *out receives TSV rows `start<TAB>end<TAB>phrase<TAB>score`. */
EBERT_API ebert_status ebert_pool_match(const ebert_pool* pool, const char* text, char** out);

/* Overlap ratio |domain intersect noun| / |domain| between a scored domain
 * pool and a phrase list (score column optional). */
EBERT_API ebert_status ebert_phrase_overlap(const char* domain_tsv, const char* noun_tsv, double* out_ratio);

/* ---- association graph ---- */

typedef struct ebert_graph ebert_graph;

EBERT_API ebert_status ebert_graph_load(const char* edges_tsv, const char* products_tsv, ebert_graph** out);
EBERT_API void ebert_graph_close(ebert_graph* graph);
EBERT_API long ebert_graph_nodes(const ebert_graph* graph);
EBERT_API long ebert_graph_edges(const ebert_graph* graph);
/* Edges dropped during load: unknown products + self loops + duplicates. */
EBERT_API long ebert_graph_dropped(const ebert_graph* graph);

/* ---- training ---- */

/* config_path may be NULL when every setting comes from overrides; each
 * override is a `key=value` string and wins over the file. */
EBERT_API ebert_status ebert_train_ahm(const char* config_path, const char* const* overrides, int n_overrides,
                                       char** out_checkpoint_dir);

EBERT_API ebert_status ebert_train_joint(const char* config_path, const char* const* overrides, int n_overrides,
                                         char** out_checkpoint_dir);

/* mode is "word" or "phrase"; pool_tsv may be NULL for word mode. */
EBERT_API ebert_status ebert_eval_mlm(const char* checkpoint_dir, const char* products_tsv,
                                      const char* reviews_tsv, const char* pool_tsv, const char* mode,
                                      uint64_t seed, double* out_loss, double* out_accuracy,
                                      long* out_masked_tokens);

/* Writes the cross-attention matrices for a product pair as CSV (alpha
 * block then beta block, token surface forms as headers). */
EBERT_API ebert_status ebert_probe_attention(const char* checkpoint_dir, const char* products_tsv,
                                             const char* product_a, const char* product_b, const char* out_csv);

EBERT_API ebert_status ebert_finetune_classify(const char* checkpoint_dir, const char* labeled_tsv,
                                               const char* out_dir, long epochs, double learning_rate,
                                               uint64_t seed, double* out_train_accuracy, long* out_classes);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* EBERT_H */
