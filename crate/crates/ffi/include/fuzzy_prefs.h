#ifndef FUZZY_PREFS_H
#define FUZZY_PREFS_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FpStatus {
  FP_STATUS_OK = 0,
  // Null pointer, bad UTF-8 or out-of-range index.
  FP_STATUS_INVALID_ARGUMENT = 1,
  // Malformed or degenerate input data, or an invalid document.
  FP_STATUS_DATA = 2,
  FP_STATUS_IO = 3,
  // Query text failed to parse; the message carries `line:column`.
  FP_STATUS_SYNTAX = 4,
  // Query values do not match the knowledge base labels.
  FP_STATUS_BINDING = 5,
  // Requested more than the data allows (terms, outcomes, buffer).
  FP_STATUS_CAPACITY = 6,
  FP_STATUS_PANIC = 7,
} FpStatus;

typedef struct FpKnowledgeBase FpKnowledgeBase;

typedef struct FpQuery FpQuery;

typedef struct FpRanking FpRanking;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *fp_last_error(void);

// # Safety
// `s` must be null or a string returned by this library, freed once.
void fp_string_free(char *s);

// Builds a knowledge base from CSV text with a header row. `clusters` is the
// region count for every attribute (0 picks the default of 3).
//
// # Safety
// `csv` must be a NUL-terminated string, `out` a writable pointer.
enum FpStatus fp_kb_build_csv(const char *csv,
                              uint32_t clusters,
                              uint64_t seed,
                              struct FpKnowledgeBase **out);

// # Safety
// `json` must be a NUL-terminated string, `out` a writable pointer.
enum FpStatus fp_kb_from_json(const char *json, struct FpKnowledgeBase **out);

// # Safety
// `kb` must be a live handle, `out` a writable pointer.
enum FpStatus fp_kb_to_json(const struct FpKnowledgeBase *kb, char **out);

// Membership of `value` to each region of `attribute`, lowest region first.
// Writes at most `capacity` degrees to `buf` and the region count to
// `out_len`; returns `Capacity` if the buffer is too small.
//
// # Safety
// `buf` must hold `capacity` doubles; `attribute` must be NUL-terminated.
enum FpStatus fp_kb_membership(const struct FpKnowledgeBase *kb,
                               const char *attribute,
                               double value,
                               double *buf,
                               size_t capacity,
                               size_t *out_len);

// # Safety
// `kb` must be null or a handle from this library, freed once.
void fp_kb_free(struct FpKnowledgeBase *kb);

// Compiles query source against `kb`. `terms` of 0 keeps the query's own
// term count (or the default).
//
// # Safety
// `source` must be NUL-terminated, `kb` live, `out` writable.
enum FpStatus fp_query_compile(const struct FpKnowledgeBase *kb,
                               const char *source,
                               uint32_t terms,
                               struct FpQuery **out);

// # Safety
// `json` must be NUL-terminated, `out` writable.
enum FpStatus fp_query_from_json(const char *json, struct FpQuery **out);

// # Safety
// `query` must be live, `out` writable.
enum FpStatus fp_query_to_json(const struct FpQuery *query, char **out);

// Number of terms, or 0 for a null handle.
//
// # Safety
// `query` must be null or live.
size_t fp_query_term_count(const struct FpQuery *query);

// Importance U of term `index` (0-based, best first).
//
// # Safety
// `query` must be live, `out` writable.
enum FpStatus fp_query_term_importance(const struct FpQuery *query, size_t index, double *out);

// # Safety
// `query` must be null or a handle from this library, freed once.
void fp_query_free(struct FpQuery *query);

// Ranks the records of CSV text (header row, empty cells allowed). `top`
// of 0 keeps every record.
//
// # Safety
// `csv` must be NUL-terminated, `kb` and `query` live, `out` writable.
enum FpStatus fp_rank_csv(const struct FpKnowledgeBase *kb,
                          const struct FpQuery *query,
                          const char *csv,
                          size_t top,
                          struct FpRanking **out);

// Number of ranked records, or 0 for a null handle.
//
// # Safety
// `ranking` must be null or live.
size_t fp_ranking_len(const struct FpRanking *ranking);

// Records that could not be scored, or 0 for a null handle.
//
// # Safety
// `ranking` must be null or live.
size_t fp_ranking_failure_count(const struct FpRanking *ranking);

// Input row index and relevance of the result at `position` (0-based).
//
// # Safety
// `ranking` must be live, the outputs writable.
enum FpStatus fp_ranking_get(const struct FpRanking *ranking,
                             size_t position,
                             size_t *out_record,
                             double *out_eval);

// The ranking as the command-line tool prints it.
//
// # Safety
// `ranking` must be live, `out` writable.
enum FpStatus fp_ranking_to_tsv(const struct FpRanking *ranking, char **out);

// # Safety
// `ranking` must be null or a handle from this library, freed once.
void fp_ranking_free(struct FpRanking *ranking);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FUZZY_PREFS_H */
