#ifndef NECLUST_H
#define NECLUST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum NeclustStatus {
  NECLUST_STATUS_OK = 0,
  NECLUST_STATUS_NULL_POINTER = 1,
  NECLUST_STATUS_INVALID_UTF8 = 2,
  NECLUST_STATUS_PARSE = 3,
  NECLUST_STATUS_VALIDATION = 4,
  NECLUST_STATUS_INVALID_ARGUMENT = 5,
  NECLUST_STATUS_PANIC = 6,
} NeclustStatus;

// A corpus validated against a knowledge base; keeps that knowledge base
// alive.
typedef struct NeclustCorpus NeclustCorpus;

// A validated knowledge base.
typedef struct NeclustKb NeclustKb;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *neclust_version(void);

// Copy of the last error message on this thread, or null if the last call
// succeeded. Release with `neclust_string_free`.
char *neclust_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a pointer obtained from this library that has not
// been freed yet.
void neclust_string_free(char *s);

// Parses and validates a knowledge base from JSON.
//
// # Safety
// `json` must be null or a NUL-terminated string; `out` must be null or
// writable.
enum NeclustStatus neclust_kb_from_json(const char *json, struct NeclustKb **out);

// Releases a knowledge base handle. Null is ignored. Corpora loaded against
// it stay valid.
//
// # Safety
// `kb` must be null or a live handle from `neclust_kb_from_json`.
void neclust_kb_free(struct NeclustKb *kb);

// Parses a JSON-Lines corpus and validates it against `kb`.
//
// # Safety
// `kb` must be a live handle; `jsonl` a NUL-terminated string; `out` writable.
enum NeclustStatus neclust_corpus_from_jsonl(const struct NeclustKb *kb,
                                             const char *jsonl,
                                             struct NeclustCorpus **out);

// Number of documents in the corpus; 0 for null.
//
// # Safety
// `corpus` must be null or a live handle.
size_t neclust_corpus_len(const struct NeclustCorpus *corpus);

// Releases a corpus handle. Null is ignored.
//
// # Safety
// `corpus` must be null or a live handle from `neclust_corpus_from_jsonl`.
void neclust_corpus_free(struct NeclustCorpus *corpus);

// Clusters the corpus and writes the JSON report to `*report_out`.
//
// `options_json` may be null for defaults, or an object with `phases`
// (`[{"space": "type", "k": "auto"}, ...]`) and any of `seed`,
// `max_iterations`, `restarts`, `min_split_size`, `alpha`, `tc_fraction`,
// `rescope_idf`, `full_sweep`.
//
// # Safety
// `corpus` must be a live handle; `options_json` null or NUL-terminated;
// `report_out` writable.
enum NeclustStatus neclust_cluster(const struct NeclustCorpus *corpus,
                                   const char *options_json,
                                   char **report_out);

// Sweeps k on one feature space and writes `{"best_k", "table"}` JSON.
//
// `options_json` may be null, or an object with any of `space`, `k_range`
// (array of k), `alpha`, `tc_fraction`, `seed`, `restarts`,
// `max_iterations`.
//
// # Safety
// As for `neclust_cluster`.
enum NeclustStatus neclust_tune(const struct NeclustCorpus *corpus,
                                const char *options_json,
                                char **result_out);

// Writes one JSON line per document with its tf.idf weights in `space`
// (`name`, `type`, `nametype` or `identifier`).
//
// # Safety
// `corpus` must be a live handle; `space` NUL-terminated; `vectors_out`
// writable.
enum NeclustStatus neclust_vectorize(const struct NeclustCorpus *corpus,
                                     const char *space,
                                     char **vectors_out);

// Generates a synthetic knowledge base (JSON) and corpus (JSON-Lines).
// `params_json` may be null or an object with any generator parameter.
//
// # Safety
// `params_json` null or NUL-terminated; both out-parameters writable.
enum NeclustStatus neclust_generate_synthetic(const char *params_json,
                                              char **kb_out,
                                              char **corpus_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NECLUST_H */
