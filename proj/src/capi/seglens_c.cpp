#include "seglens/seglens.h"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <mutex>
#include <new>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "seglens/align.hpp"
#include "seglens/corpus.hpp"
#include "seglens/error.hpp"
#include "seglens/morph.hpp"
#include "seglens/scorer.hpp"
#include "seglens/simangle.hpp"
#include "seglens/stats.hpp"
#include "seglens/tagger.hpp"
#include "seglens/wordpiece.hpp"

#ifndef SEGLENS_VERSION
#define SEGLENS_VERSION "0.0.0"
#endif

struct sl_corpus {
  seglens::Corpus corpus;
};

struct sl_tokenizer {
  std::unique_ptr<seglens::PieceSource> source;
  std::shared_ptr<const seglens::Vocab> vocab;  // null for external sources
};

struct sl_folds {
  seglens::FoldPlan plan;
};

struct sl_embeddings {
  seglens::EmbeddingTable table;
};

struct sl_model {
  seglens::tagger::ModelParams params;
  seglens::tagger::TaggerConfig config;
};

namespace {

using namespace seglens;

thread_local std::string g_last_error;

sl_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return SL_ERR_PARSE;
    case ErrorKind::kValidation: return SL_ERR_VALIDATION;
    case ErrorKind::kIo: return SL_ERR_IO;
    case ErrorKind::kArgument: return SL_ERR_ARGUMENT;
    case ErrorKind::kNumeric: return SL_ERR_NUMERIC;
  }
  return SL_ERR_INTERNAL;
}

template <typename F>
sl_status guard(F&& body) {
  g_last_error.clear();
  try {
    body();
    return SL_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = std::string("internal: ") + e.what();
  } catch (...) {
    g_last_error = "internal: unknown exception";
  }
  return SL_ERR_INTERNAL;
}

[[noreturn]] void bad_arg(const std::string& msg) { throw Error(ErrorKind::kArgument, "capi", msg); }

template <typename T>
void need(const T* p, const char* what) {
  if (!p) bad_arg(std::string(what) + " is null");
}

char* dup(std::string_view s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size());
  p[s.size()] = '\0';
  return p;
}

Casing casing_arg(const char* s) {
  if (!s) return Casing::kCased;
  auto c = parse_casing(s);
  if (!c) bad_arg(std::string("unknown casing \"") + s + "\"");
  return *c;
}

Aggregation aggregation_arg(const char* s) {
  need(s, "aggregation");
  auto a = parse_aggregation(s);
  if (!a) bad_arg(std::string("unknown aggregation \"") + s + "\"");
  return *a;
}

void fill(const MetricRow& m, sl_metric* out) {
  out->true_positives = m.true_positives;
  out->predicted = m.predicted;
  out->gold = m.gold;
  out->precision = m.precision();
  out->recall = m.recall();
  out->f1 = m.f1();
}

tagger::TaggerConfig config_arg(const char* json) {
  if (!json || !*json) return {};
  return tagger::config_from_json(json);
}

std::vector<tagger::TaggerInput> features_for(const Corpus& corpus, const sl_features* f,
                                              Aggregation aggregation) {
  need(f, "features");
  need(f->embeddings, "features.embeddings");
  const auto& table = f->embeddings->table;
  if (table.level() == EmbeddingLevel::kWord) {
    return tagger::build_inputs(corpus, table, nullptr, aggregation);
  }
  if (!f->tokenizer) bad_arg("subword embeddings need a tokenizer to align words");
  auto alignments = build_alignments(corpus, *f->tokenizer->source,
                                     Specials{f->leading_specials, f->trailing_specials});
  return tagger::build_inputs(corpus, table, &alignments, aggregation);
}

}  // namespace

extern "C" {

const char* sl_version(void) { return SEGLENS_VERSION; }

const char* sl_last_error(void) { return g_last_error.c_str(); }

void sl_free(void* p) { std::free(p); }

sl_status sl_corpus_load(const char* path, sl_corpus** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new sl_corpus{load_corpus(path)};
  });
}

sl_status sl_corpus_parse(const char* json, size_t len, sl_corpus** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    *out = new sl_corpus{parse_corpus_json(std::string_view(json, len))};
  });
}

size_t sl_corpus_size(const sl_corpus* corpus) { return corpus ? corpus->corpus.size() : 0; }

size_t sl_corpus_overlapping_spans(const sl_corpus* corpus) {
  return corpus ? corpus->corpus.summary().overlapping_spans : 0;
}

void sl_corpus_free(sl_corpus* corpus) { delete corpus; }

sl_status sl_tokenizer_from_vocab(const char* vocab_path, const char* casing, const char* name,
                                  sl_tokenizer** out) {
  return guard([&] {
    need(vocab_path, "vocab_path");
    need(out, "out");
    auto vocab = std::make_shared<const Vocab>(load_vocab(vocab_path));
    auto source = std::make_unique<WordPieceSource>(vocab, casing_arg(casing),
                                                    name ? name : "wordpiece");
    *out = new sl_tokenizer{std::move(source), vocab};
  });
}

sl_status sl_tokenizer_from_external(const char* path, const sl_corpus* corpus, const char* name,
                                     sl_tokenizer** out) {
  return guard([&] {
    need(path, "path");
    need(corpus, "corpus");
    need(out, "out");
    auto source = std::make_unique<ExternalPieceSource>(
        ingest_external_tokenization(path, corpus->corpus), name ? name : "external");
    *out = new sl_tokenizer{std::move(source), nullptr};
  });
}

sl_status sl_tokenize_word(const sl_tokenizer* tok, const char* word, char** out_json) {
  return guard([&] {
    need(tok, "tokenizer");
    need(word, "word");
    need(out_json, "out_json");
    if (!tok->vocab) bad_arg("external tokenizers cannot split arbitrary words");
    auto* wp = static_cast<const WordPieceSource*>(tok->source.get());
    Corpus empty;
    nlohmann::json j = wp->pieces_for_surface(word, empty, 0, 0);
    *out_json = dup(j.dump());
  });
}

void sl_tokenizer_free(sl_tokenizer* tok) { delete tok; }

sl_status sl_stats_csv(const sl_corpus* corpus, const sl_tokenizer* tok, const char* casing,
                       char** out_csv) {
  return guard([&] {
    need(corpus, "corpus");
    need(tok, "tokenizer");
    need(out_csv, "out_csv");
    *out_csv = dup(stats_csv(full_stats(corpus->corpus, *tok->source, casing_arg(casing))));
  });
}

void sl_morph_options_default(sl_morph_options* options) {
  if (!options) return;
  static const size_t kThresholds[] = {40, 30, 20, 10};
  MorphRunOptions d;
  options->n = d.ngram.n;
  options->casing = "cased";
  options->exclusion_top = d.exclusion_top;
  options->k = d.k;
  options->thresholds = kThresholds;
  options->threshold_count = 4;
}

sl_status sl_morph(const sl_corpus* corpus, const sl_morph_options* options,
                   char** out_ngram_csv, char** out_threshold_csv, char* out_svgs[2]) {
  return guard([&] {
    need(corpus, "corpus");
    need(options, "options");
    MorphRunOptions o;
    o.ngram.n = options->n;
    o.casing = casing_arg(options->casing);
    o.exclusion_top = options->exclusion_top;
    o.k = options->k;
    if (options->threshold_count > 0) need(options->thresholds, "options.thresholds");
    o.thresholds.assign(options->thresholds, options->thresholds + options->threshold_count);
    MorphAnalysis a = run_morph(corpus->corpus, o);
    // Render everything before handing out buffers so a failure leaks nothing.
    std::string ngrams = morph_csv(a.reports);
    std::string thresholds = threshold_csv(a.reports);
    std::vector<std::string> svgs;
    for (const auto& r : a.reports) svgs.push_back(morph_svg(r));
    if (out_ngram_csv) *out_ngram_csv = dup(ngrams);
    if (out_threshold_csv) *out_threshold_csv = dup(thresholds);
    if (out_svgs) {
      for (size_t i = 0; i < 2; ++i) out_svgs[i] = i < svgs.size() ? dup(svgs[i]) : nullptr;
    }
  });
}

sl_status sl_folds_make(const sl_corpus* corpus, size_t k, double dev_fraction, uint64_t seed,
                        const char* const* external_paths, size_t external_count, sl_folds** out) {
  return guard([&] {
    need(corpus, "corpus");
    need(out, "out");
    FoldOptions o{k, dev_fraction, seed};
    if (external_count == 0) {
      *out = new sl_folds{make_folds(corpus->corpus, o)};
      return;
    }
    need(external_paths, "external_paths");
    std::vector<std::vector<size_t>> tests;
    for (size_t i = 0; i < external_count; ++i) {
      need(external_paths[i], "external path");
      tests.push_back(load_fold_file(external_paths[i]));
    }
    o.k = external_count;
    *out = new sl_folds{make_folds(corpus->corpus, o, tests)};
  });
}

size_t sl_folds_count(const sl_folds* folds) { return folds ? folds->plan.folds.size() : 0; }

sl_status sl_folds_json(const sl_folds* folds, char** out_json) {
  return guard([&] {
    need(folds, "folds");
    need(out_json, "out_json");
    *out_json = dup(serialize_fold_plan(folds->plan));
  });
}

sl_status sl_folds_subset(const sl_folds* folds, const sl_corpus* corpus, size_t fold,
                          const char* part, sl_corpus** out) {
  return guard([&] {
    need(folds, "folds");
    need(corpus, "corpus");
    need(part, "part");
    need(out, "out");
    if (fold >= folds->plan.folds.size()) {
      bad_arg("fold " + std::to_string(fold) + " out of range (" +
              std::to_string(folds->plan.folds.size()) + " folds)");
    }
    const Fold& f = folds->plan.folds[fold];
    std::string_view p(part);
    const std::vector<std::string>* ids = p == "train" ? &f.train_ids
                                          : p == "dev" ? &f.dev_ids
                                          : p == "test" ? &f.test_ids
                                                        : nullptr;
    if (!ids) bad_arg("unknown fold part \"" + std::string(p) + "\"");
    *out = new sl_corpus{corpus->corpus.subset(*ids)};
  });
}

void sl_folds_free(sl_folds* folds) { delete folds; }

sl_status sl_embeddings_load(const char* path, sl_embeddings** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new sl_embeddings{load_embeddings(path)};
  });
}

size_t sl_embeddings_dim(const sl_embeddings* table) { return table ? table->table.dim() : 0; }

int sl_embeddings_is_subword(const sl_embeddings* table) {
  return table && table->table.level() == EmbeddingLevel::kSubword ? 1 : 0;
}

sl_status sl_embeddings_aggregate(const sl_embeddings* table, const sl_corpus* corpus,
                                  const sl_tokenizer* tok, size_t leading_specials,
                                  size_t trailing_specials, const char* aggregation,
                                  sl_embeddings** out) {
  return guard([&] {
    need(table, "table");
    need(corpus, "corpus");
    need(tok, "tokenizer");
    need(out, "out");
    Aggregation mode = aggregation_arg(aggregation);
    if (mode == Aggregation::kNone) bad_arg("aggregation to word level needs sum or average");
    if (table->table.level() != EmbeddingLevel::kSubword) bad_arg("table is already word level");
    auto alignments = build_alignments(corpus->corpus, *tok->source,
                                       Specials{leading_specials, trailing_specials});
    *out = new sl_embeddings{aggregate_embeddings(table->table, alignments, mode)};
  });
}

void sl_embeddings_free(sl_embeddings* table) { delete table; }

sl_status sl_similarity_csv(const sl_corpus* corpus, const sl_folds* folds,
                            const sl_embeddings* word_table, const char* mode, size_t threads,
                            char** out_csv, size_t* out_zero_vectors) {
  return guard([&] {
    need(corpus, "corpus");
    need(folds, "folds");
    need(word_table, "word_table");
    need(out_csv, "out_csv");
    if (word_table->table.level() != EmbeddingLevel::kWord) {
      bad_arg("similarity needs word-level vectors; aggregate subword tables first");
    }
    SimilarityMode m = SimilarityMode::kPairwise;
    if (mode && std::string_view(mode) == "centroid") m = SimilarityMode::kCentroid;
    else if (mode && std::string_view(mode) != "pairwise") bad_arg(std::string("unknown similarity mode \"") + mode + "\"");

    const auto& plan = folds->plan.folds;
    std::vector<SimilarityReport::Scores> scores(plan.size());
    std::vector<size_t> zeros(plan.size(), 0);
    std::vector<std::exception_ptr> errors(plan.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t i = next++; i < plan.size(); i = next++) {
        try {
          scores[i] = fold_scores(corpus->corpus, plan[i].test_ids, word_table->table, m, &zeros[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    size_t n = threads == 0 ? plan.size() : std::min(threads, plan.size());
    std::vector<std::thread> pool;
    for (size_t i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    // Report the first failing fold, independent of scheduling.
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    SimilarityReport report = fold_average_report(scores);
    for (size_t z : zeros) report.zero_vectors += z;
    *out_csv = dup(similarity_csv(report));
    if (out_zero_vectors) *out_zero_vectors = report.zero_vectors;
  });
}

sl_status sl_score(const sl_corpus* gold, const char* prediction_path, sl_metric* out_ner,
                   sl_metric* out_re) {
  return guard([&] {
    need(gold, "gold");
    need(prediction_path, "prediction_path");
    Prediction pred = load_prediction(prediction_path);
    MetricRow ner = score_ner(gold->corpus, pred);
    MetricRow re = score_re(gold->corpus, pred);
    if (out_ner) fill(ner, out_ner);
    if (out_re) fill(re, out_re);
  });
}

sl_status sl_fold_summary(const double* values, size_t n, sl_summary* out) {
  return guard([&] {
    if (n > 0) need(values, "values");
    need(out, "out");
    FoldSummary s = fold_summary(std::vector<double>(values, values + n));
    out->mean = s.mean;
    out->has_stddev = s.stddev.has_value();
    out->stddev = s.stddev.value_or(0.0);
  });
}

sl_status sl_format_summary(const sl_summary* summary, char** out) {
  return guard([&] {
    need(summary, "summary");
    need(out, "out");
    FoldSummary s{summary->mean, std::nullopt};
    if (summary->has_stddev) s.stddev = summary->stddev;
    *out = dup(format_summary(s));
  });
}

sl_status sl_ttest(const double* a, size_t na, const double* b, size_t nb, int paired,
                   sl_ttest_result* out) {
  return guard([&] {
    if (na > 0) need(a, "a");
    if (nb > 0) need(b, "b");
    need(out, "out");
    TTestResult r = welch_ttest(std::vector<double>(a, a + na), std::vector<double>(b, b + nb),
                                paired != 0);
    *out = {r.t, r.df, r.p, r.significant ? 1 : 0};
  });
}

sl_status sl_score_csv(const char* model, const char* aggregation, const double* ner_f1,
                       const double* re_f1, size_t folds, char** out_csv) {
  return guard([&] {
    need(out_csv, "out_csv");
    if (folds > 0) {
      need(ner_f1, "ner_f1");
      need(re_f1, "re_f1");
    }
    ScoreRow row{model ? model : "", aggregation ? aggregation : "",
                 std::vector<double>(ner_f1, ner_f1 + folds), std::vector<double>(re_f1, re_f1 + folds)};
    *out_csv = dup(score_csv({row}));
  });
}

sl_status sl_train(const sl_corpus* train, const sl_corpus* dev, const sl_features* features,
                   const char* config_json, sl_model** out_model, char** out_log_jsonl) {
  return guard([&] {
    need(train, "train");
    need(out_model, "out_model");
    tagger::TaggerConfig config = config_arg(config_json);
    auto train_inputs = features_for(train->corpus, features, config.aggregation);
    std::vector<tagger::TaggerInput> dev_inputs;
    Corpus none;
    if (dev) dev_inputs = features_for(dev->corpus, features, config.aggregation);
    auto result = tagger::train(train_inputs, train->corpus, dev_inputs, dev ? dev->corpus : none, config);
    std::string log = tagger::training_log_jsonl(result.log);
    auto model = std::make_unique<sl_model>(sl_model{std::move(result.params), config});
    if (out_log_jsonl) *out_log_jsonl = dup(log);
    *out_model = model.release();
  });
}

sl_status sl_model_save(const sl_model* model, const char* path) {
  return guard([&] {
    need(model, "model");
    need(path, "path");
    tagger::save_checkpoint(path, model->params, model->config);
  });
}

sl_status sl_model_load(const char* path, sl_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto [params, config] = tagger::load_checkpoint(path);
    *out = new sl_model{std::move(params), config};
  });
}

sl_status sl_model_config_json(const sl_model* model, char** out_json) {
  return guard([&] {
    need(model, "model");
    need(out_json, "out_json");
    *out_json = dup(tagger::config_to_json(model->config));
  });
}

sl_status sl_decode(const sl_model* model, const sl_corpus* corpus, const sl_features* features,
                    char** out_json) {
  return guard([&] {
    need(model, "model");
    need(corpus, "corpus");
    need(out_json, "out_json");
    auto inputs = features_for(corpus->corpus, features, model->config.aggregation);
    Prediction pred = tagger::decode_all(model->params, inputs, model->config);
    *out_json = dup(serialize_prediction(pred, corpus->corpus));
  });
}

void sl_model_free(sl_model* model) { delete model; }

sl_status sl_gradcheck(const sl_corpus* corpus, const sl_features* features,
                       const char* config_json, size_t batch, size_t coordinates,
                       uint64_t sample_seed, sl_gradcheck_result* out) {
  return guard([&] {
    need(corpus, "corpus");
    need(out, "out");
    if (batch == 0) bad_arg("batch must hold at least one sentence");
    tagger::TaggerConfig config = config_arg(config_json);
    auto inputs = features_for(corpus->corpus, features, config.aggregation);
    if (inputs.size() > batch) inputs.resize(batch);
    if (inputs.empty()) bad_arg("corpus is empty");
    auto params = tagger::ModelParams::random(config, inputs.front().features.cols, config.seed);
    tagger::GradCheckOptions o;
    o.coordinates = coordinates;
    o.seed = sample_seed;
    auto r = tagger::grad_check(params, inputs, config, o);
    *out = {r.max_relative_error, r.checked, r.skipped};
  });
}

}  // extern "C"
