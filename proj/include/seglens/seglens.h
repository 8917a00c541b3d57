#ifndef SEGLENS_SEGLENS_H
#define SEGLENS_SEGLENS_H

/*
 * C interface to libseglens.
 *
 * Every fallible call returns an sl_status; on failure sl_last_error() holds
 * a module-qualified message for the calling thread until its next call.
 * Strings returned through char** out-parameters are NUL-terminated, heap
 * allocated and released with sl_free. Handles are released with their own
 * *_free function; passing NULL to any *_free is a no-op.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define SL_API __attribute__((visibility("default")))
#else
#define SL_API
#endif

typedef enum {
  SL_OK = 0,
  SL_ERR_PARSE = 1,
  SL_ERR_VALIDATION = 2,
  SL_ERR_IO = 3,
  SL_ERR_ARGUMENT = 4,
  SL_ERR_NUMERIC = 5,
  SL_ERR_INTERNAL = 6
} sl_status;

typedef struct sl_corpus sl_corpus;
typedef struct sl_tokenizer sl_tokenizer;
typedef struct sl_folds sl_folds;
typedef struct sl_embeddings sl_embeddings;
typedef struct sl_model sl_model;

SL_API const char* sl_version(void);
SL_API const char* sl_last_error(void);
SL_API void sl_free(void* p);

/* Corpus */

SL_API sl_status sl_corpus_load(const char* path, sl_corpus** out);
SL_API sl_status sl_corpus_parse(const char* json, size_t len, sl_corpus** out);
SL_API size_t sl_corpus_size(const sl_corpus* corpus);
/* Number of entity pairs with overlapping spans seen while loading. */
SL_API size_t sl_corpus_overlapping_spans(const sl_corpus* corpus);
SL_API void sl_corpus_free(sl_corpus* corpus);

/* Tokenizers. casing is "cased" or "uncased" and selects the normalization
 * applied before vocabulary lookup. */

SL_API sl_status sl_tokenizer_from_vocab(const char* vocab_path, const char* casing,
                                         const char* name, sl_tokenizer** out);
/* Pre-tokenized subwords for every sentence of `corpus`. */
SL_API sl_status sl_tokenizer_from_external(const char* path, const sl_corpus* corpus,
                                            const char* name, sl_tokenizer** out);
/* JSON array of the pieces of one word (vocab tokenizers only). */
SL_API sl_status sl_tokenize_word(const sl_tokenizer* tok, const char* word,
                                  char** out_json);
SL_API void sl_tokenizer_free(sl_tokenizer* tok);

/* Analyses. casing selects how words are keyed ("cased" or "uncased"). */

SL_API sl_status sl_stats_csv(const sl_corpus* corpus, const sl_tokenizer* tok,
                              const char* casing, char** out_csv);

typedef struct {
  size_t n;                   /* n-gram length */
  const char* casing;         /* word keying before n-gram extraction */
  size_t exclusion_top;       /* top Out n-grams excluded from entity ranks */
  size_t k;
  const size_t* thresholds;
  size_t threshold_count;
} sl_morph_options;

SL_API void sl_morph_options_default(sl_morph_options* options);
/* out_svgs receives one chart per entity type: Drug, then AdverseEffect. */
SL_API sl_status sl_morph(const sl_corpus* corpus, const sl_morph_options* options,
                          char** out_ngram_csv, char** out_threshold_csv,
                          char* out_svgs[2]);

/* Folds. external_paths, when non-empty, lists one file per fold holding a
 * JSON array of test sentence positions. */

SL_API sl_status sl_folds_make(const sl_corpus* corpus, size_t k, double dev_fraction,
                               uint64_t seed, const char* const* external_paths,
                               size_t external_count, sl_folds** out);
SL_API size_t sl_folds_count(const sl_folds* folds);
SL_API sl_status sl_folds_json(const sl_folds* folds, char** out_json);
/* part is "train", "dev" or "test". */
SL_API sl_status sl_folds_subset(const sl_folds* folds, const sl_corpus* corpus,
                                 size_t fold, const char* part, sl_corpus** out);
SL_API void sl_folds_free(sl_folds* folds);

/* Embeddings (JSON lines, word or subword level). */

SL_API sl_status sl_embeddings_load(const char* path, sl_embeddings** out);
SL_API size_t sl_embeddings_dim(const sl_embeddings* table);
/* Non-zero for subword-level tables. */
SL_API int sl_embeddings_is_subword(const sl_embeddings* table);
/* Collapses a subword table to word level ("sum" or "average"). */
SL_API sl_status sl_embeddings_aggregate(const sl_embeddings* table, const sl_corpus* corpus,
                                         const sl_tokenizer* tok, size_t leading_specials,
                                         size_t trailing_specials, const char* aggregation,
                                         sl_embeddings** out);
SL_API void sl_embeddings_free(sl_embeddings* table);

/* Similarity of entity groups per test fold; mode is "pairwise" or
 * "centroid". threads == 0 means one worker per fold. */
SL_API sl_status sl_similarity_csv(const sl_corpus* corpus, const sl_folds* folds,
                                   const sl_embeddings* word_table, const char* mode,
                                   size_t threads, char** out_csv,
                                   size_t* out_zero_vectors);

/* Scoring */

typedef struct {
  size_t true_positives;
  size_t predicted;
  size_t gold;
  double precision; /* percentages */
  double recall;
  double f1;
} sl_metric;

SL_API sl_status sl_score(const sl_corpus* gold, const char* prediction_path,
                          sl_metric* out_ner, sl_metric* out_re);

typedef struct {
  double mean;
  double stddev;
  int has_stddev;
} sl_summary;

SL_API sl_status sl_fold_summary(const double* values, size_t n, sl_summary* out);
/* "mean ± std" with one decimal. */
SL_API sl_status sl_format_summary(const sl_summary* summary, char** out);

typedef struct {
  double t;
  double df;
  double p;
  int significant;
} sl_ttest_result;

SL_API sl_status sl_ttest(const double* a, size_t na, const double* b, size_t nb,
                          int paired, sl_ttest_result* out);

/* Per-fold F1 table: model,aggregation,fold,ner_f1,re_f1 plus mean and std. */
SL_API sl_status sl_score_csv(const char* model, const char* aggregation,
                              const double* ner_f1, const double* re_f1, size_t folds,
                              char** out_csv);

/* Tagger. Features come from a word-level table, or from a subword table
 * aligned through `tokenizer` with the given special-row counts. */

typedef struct {
  const sl_embeddings* embeddings;
  const sl_tokenizer* tokenizer; /* NULL for word-level tables */
  size_t leading_specials;
  size_t trailing_specials;
} sl_features;

/* config_json mirrors the tagger configuration; NULL or "" keeps defaults.
 * dev may be NULL, in which case the training sentences select the epoch. */
SL_API sl_status sl_train(const sl_corpus* train, const sl_corpus* dev,
                          const sl_features* features, const char* config_json,
                          sl_model** out_model, char** out_log_jsonl);
SL_API sl_status sl_model_save(const sl_model* model, const char* path);
SL_API sl_status sl_model_load(const char* path, sl_model** out);
SL_API sl_status sl_model_config_json(const sl_model* model, char** out_json);
/* Predictions in the corpus schema. */
SL_API sl_status sl_decode(const sl_model* model, const sl_corpus* corpus,
                           const sl_features* features, char** out_json);
SL_API void sl_model_free(sl_model* model);

typedef struct {
  double max_relative_error;
  size_t checked;
  size_t skipped;
} sl_gradcheck_result;

/* Gradient check at random initialization (model seed from the config) on the
 * first `batch` sentences. */
SL_API sl_status sl_gradcheck(const sl_corpus* corpus, const sl_features* features,
                              const char* config_json, size_t batch, size_t coordinates,
                              uint64_t sample_seed, sl_gradcheck_result* out);

#ifdef __cplusplus
}
#endif

#endif
