#include <openssl/evp.h>

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "plan.hpp"
#include "seglens/seglens.h"

namespace seglens::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(sl_status s) {
  if (s != SL_OK) throw DomainError(sl_last_error());
}

template <auto Free>
struct Deleter {
  template <typename T>
  void operator()(T* p) const { Free(p); }
};

using CorpusPtr = std::unique_ptr<sl_corpus, Deleter<sl_corpus_free>>;
using TokenizerPtr = std::unique_ptr<sl_tokenizer, Deleter<sl_tokenizer_free>>;
using FoldsPtr = std::unique_ptr<sl_folds, Deleter<sl_folds_free>>;
using EmbeddingsPtr = std::unique_ptr<sl_embeddings, Deleter<sl_embeddings_free>>;
using ModelPtr = std::unique_ptr<sl_model, Deleter<sl_model_free>>;

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  sl_free(s);
  return out;
}

std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DomainError("cli: cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw DomainError("cli: SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DomainError("cli: cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DomainError("cli: cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DomainError("cli: cannot rename onto " + path.string() + ": " + ec.message());
}

// Collects outputs in memory; everything is written once the run succeeded.
struct Run {
  const RunPlan& plan;
  std::vector<std::pair<std::string, std::string>> outputs;
  std::vector<std::string> inputs;
  json extra = json::object();

  void input(const std::string& path) {
    if (!path.empty()) inputs.push_back(path);
  }
  void output(std::string name, std::string bytes) { outputs.emplace_back(std::move(name), std::move(bytes)); }

  void commit() {
    json manifest;
    manifest["tool"] = "seglens";
    manifest["version"] = sl_version();
    manifest["subcommand"] = to_string(plan.subcommand);
    manifest["argv"] = plan.argv;
    manifest["seed"] = plan.seed;
    json in = json::array();
    for (const auto& path : inputs) in.push_back({{"path", path}, {"sha256", sha256_hex(read_bytes(path))}});
    manifest["inputs"] = in;
    json out = json::array();
    for (const auto& [name, bytes] : outputs) {
      write_atomic(fs::path(plan.out) / name, bytes);
      out.push_back({{"file", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    }
    manifest["outputs"] = out;
    if (!extra.empty()) manifest["details"] = extra;
    manifest["created"] = utc_timestamp();
    write_atomic(fs::path(plan.out) / "manifest.json", manifest.dump(2) + "\n");
  }
};

CorpusPtr load_corpus(Run& run, const std::string& path) {
  run.input(path);
  sl_corpus* c = nullptr;
  check(sl_corpus_load(path.c_str(), &c));
  return CorpusPtr(c);
}

// Null when no tokenizer flag was given.
TokenizerPtr load_tokenizer(Run& run, const TokenizerFlags& t, const sl_corpus* corpus) {
  sl_tokenizer* tok = nullptr;
  if (!t.vocab.empty()) {
    run.input(t.vocab);
    std::string name = t.name.empty() ? fs::path(t.vocab).stem().string() : t.name;
    check(sl_tokenizer_from_vocab(t.vocab.c_str(), t.casing.c_str(), name.c_str(), &tok));
  } else if (!t.tokenization.empty()) {
    run.input(t.tokenization);
    std::string name = t.name.empty() ? fs::path(t.tokenization).stem().string() : t.name;
    check(sl_tokenizer_from_external(t.tokenization.c_str(), corpus, name.c_str(), &tok));
  }
  return TokenizerPtr(tok);
}

EmbeddingsPtr load_embeddings(Run& run, const std::string& path) {
  run.input(path);
  sl_embeddings* e = nullptr;
  check(sl_embeddings_load(path.c_str(), &e));
  return EmbeddingsPtr(e);
}

FoldsPtr make_folds(Run& run, const RunPlan& p, const sl_corpus* corpus) {
  std::vector<const char*> files;
  for (const auto& f : p.folds.fold_files) {
    run.input(f);
    files.push_back(f.c_str());
  }
  sl_folds* folds = nullptr;
  check(sl_folds_make(corpus, p.folds.k, p.folds.dev_fraction, p.seed, files.data(), files.size(), &folds));
  return FoldsPtr(folds);
}

// Config file contents with the run seed applied.
std::string effective_config(Run& run, const RunPlan& p) {
  json cfg = json::object();
  if (!p.config.empty()) {
    run.input(p.config);
    try {
      cfg = json::parse(read_bytes(p.config));
    } catch (const json::parse_error& e) {
      throw DomainError("cli: " + p.config + ": " + e.what());
    }
    if (!cfg.is_object()) throw DomainError("cli: " + p.config + ": config is not an object");
  }
  cfg["seed"] = p.seed;
  return cfg.dump();
}

json metric_json(const sl_metric& m) {
  return {{"true_positives", m.true_positives}, {"predicted", m.predicted}, {"gold", m.gold},
          {"precision", m.precision},           {"recall", m.recall},       {"f1", m.f1}};
}

std::string summary_text(const std::vector<double>& v) {
  sl_summary s{};
  check(sl_fold_summary(v.data(), v.size(), &s));
  char* out = nullptr;
  check(sl_format_summary(&s, &out));
  return take(out);
}

void run_stats(Run& run) {
  const auto& p = run.plan;
  auto corpus = load_corpus(run, p.corpus);
  auto tok = load_tokenizer(run, p.tokenizer, corpus.get());
  char* csv = nullptr;
  check(sl_stats_csv(corpus.get(), tok.get(), p.casing.c_str(), &csv));
  run.output("stats.csv", take(csv));
  run.extra["overlapping_spans"] = sl_corpus_overlapping_spans(corpus.get());
}

void run_morph(Run& run) {
  const auto& p = run.plan;
  auto corpus = load_corpus(run, p.corpus);
  sl_morph_options o;
  sl_morph_options_default(&o);
  o.n = p.ngram;
  o.casing = p.casing.c_str();
  o.exclusion_top = p.exclusion_top;
  o.k = p.k;
  o.thresholds = p.thresholds.data();
  o.threshold_count = p.thresholds.size();
  char* ngrams = nullptr;
  char* thresholds = nullptr;
  char* svgs[2] = {nullptr, nullptr};
  check(sl_morph(corpus.get(), &o, &ngrams, &thresholds, svgs));
  run.output("morph_ngrams.csv", take(ngrams));
  run.output("morph_thresholds.csv", take(thresholds));
  run.output("morph_drug.svg", take(svgs[0]));
  run.output("morph_adverse_effect.svg", take(svgs[1]));
}

void run_folds(Run& run) {
  const auto& p = run.plan;
  auto corpus = load_corpus(run, p.corpus);
  auto folds = make_folds(run, p, corpus.get());
  char* out = nullptr;
  check(sl_folds_json(folds.get(), &out));
  run.output("folds.json", take(out));
}

size_t thread_cap() {
  const char* env = std::getenv("SEGLENS_THREADS");
  if (!env || !*env) return 0;
  char* end = nullptr;
  unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) throw DomainError("cli: SEGLENS_THREADS must be a positive integer");
  return v;
}

void run_sim(Run& run) {
  const auto& p = run.plan;
  auto corpus = load_corpus(run, p.corpus);
  auto tok = load_tokenizer(run, p.tokenizer, corpus.get());
  auto table = load_embeddings(run, p.embeddings);
  if (sl_embeddings_is_subword(table.get())) {
    if (!tok) throw DomainError("cli: subword embeddings need --vocab or --tokenization");
    sl_embeddings* words = nullptr;
    check(sl_embeddings_aggregate(table.get(), corpus.get(), tok.get(), p.tokenizer.leading_specials,
                                  p.tokenizer.trailing_specials, p.aggregation.c_str(), &words));
    table.reset(words);
  }
  auto folds = make_folds(run, p, corpus.get());
  char* csv = nullptr;
  size_t zeros = 0;
  check(sl_similarity_csv(corpus.get(), folds.get(), table.get(), p.similarity_mode.c_str(), thread_cap(),
                          &csv, &zeros));
  run.output("similarity.csv", take(csv));
  char* plan_json = nullptr;
  check(sl_folds_json(folds.get(), &plan_json));
  run.output("folds.json", take(plan_json));
  run.extra["zero_vectors"] = zeros;
}

void run_score(Run& run) {
  const auto& p = run.plan;
  std::vector<CorpusPtr> gold;
  for (const auto& g : p.gold) gold.push_back(load_corpus(run, g));
  json folds = json::array();
  std::vector<double> ner, re;
  for (size_t i = 0; i < p.predictions.size(); ++i) {
    run.input(p.predictions[i]);
    const sl_corpus* g = gold.size() == 1 ? gold[0].get() : gold[i].get();
    sl_metric mn{}, mr{};
    check(sl_score(g, p.predictions[i].c_str(), &mn, &mr));
    ner.push_back(mn.f1);
    re.push_back(mr.f1);
    folds.push_back({{"fold", i}, {"prediction", p.predictions[i]}, {"ner", metric_json(mn)}, {"re", metric_json(mr)}});
  }
  json report = {{"model", p.model_name},
                 {"aggregation", p.aggregation},
                 {"folds", folds},
                 {"ner", summary_text(ner)},
                 {"re", summary_text(re)}};
  run.output("score.json", report.dump(2) + "\n");
  char* csv = nullptr;
  check(sl_score_csv(p.model_name.c_str(), p.aggregation.c_str(), ner.data(), re.data(), ner.size(), &csv));
  run.output("score.csv", take(csv));
  std::cout << p.model_name << " | " << p.aggregation << " | NER " << summary_text(ner) << " | RE "
            << summary_text(re) << "\n";
}

void run_ttest(Run& run) {
  const auto& p = run.plan;
  sl_ttest_result r{};
  check(sl_ttest(p.sample_a.data(), p.sample_a.size(), p.sample_b.data(), p.sample_b.size(), p.paired, &r));
  json j = {{"a", p.sample_a}, {"b", p.sample_b}, {"paired", p.paired},
            {"t", r.t},        {"df", r.df},       {"p", r.p},
            {"significant", r.significant != 0}};
  // Infinite t (zero variance, different means) has no JSON number.
  if (!std::isfinite(r.t)) j["t"] = r.t > 0 ? "inf" : "-inf";
  run.output("ttest.json", j.dump(2) + "\n");
}

sl_features features_of(const RunPlan& p, const sl_embeddings* table, const sl_tokenizer* tok) {
  return {table, tok, p.tokenizer.leading_specials, p.tokenizer.trailing_specials};
}

size_t best_epoch(const std::string& log_jsonl) {
  std::istringstream in(log_jsonl);
  std::string line;
  size_t best = 0;
  double best_score = -1.0;
  while (std::getline(in, line)) {
    auto r = json::parse(line);
    double s = 0.5 * (r["dev_ner_f1"].get<double>() + r["dev_re_f1"].get<double>());
    if (s > best_score) {
      best_score = s;
      best = r["epoch"].get<size_t>();
    }
  }
  return best;
}

void run_train(Run& run) {
  const auto& p = run.plan;
  auto corpus = load_corpus(run, p.corpus);
  auto tok = load_tokenizer(run, p.tokenizer, corpus.get());
  auto table = load_embeddings(run, p.embeddings);
  std::string config = effective_config(run, p);
  sl_features feats = features_of(p, table.get(), tok.get());

  CorpusPtr train_part, dev_part, test_part;
  const sl_corpus* train_set = corpus.get();
  const sl_corpus* dev_set = nullptr;
  if (p.fold) {
    auto folds = make_folds(run, p, corpus.get());
    sl_corpus* c = nullptr;
    check(sl_folds_subset(folds.get(), corpus.get(), *p.fold, "train", &c));
    train_part.reset(c);
    check(sl_folds_subset(folds.get(), corpus.get(), *p.fold, "dev", &c));
    dev_part.reset(c);
    check(sl_folds_subset(folds.get(), corpus.get(), *p.fold, "test", &c));
    test_part.reset(c);
    train_set = train_part.get();
    if (sl_corpus_size(dev_part.get()) > 0) dev_set = dev_part.get();
  }

  sl_model* m = nullptr;
  char* log = nullptr;
  check(sl_train(train_set, dev_set, &feats, config.c_str(), &m, &log));
  ModelPtr model(m);
  std::string log_text = take(log);

  // The checkpoint goes through the library's own writer, then is read back
  // so the manifest hashes exactly what is on disk.
  fs::path ckpt = fs::path(p.out) / "model.sltk";
  check(sl_model_save(model.get(), ckpt.string().c_str()));
  run.output("model.sltk", read_bytes(ckpt.string()));
  run.output("training_log.jsonl", log_text);
  char* cfg = nullptr;
  check(sl_model_config_json(model.get(), &cfg));
  run.output("config.json", json::parse(take(cfg)).dump(2) + "\n");

  run.extra["pairing"] = "start-word";
  run.extra["best_epoch"] = best_epoch(log_text);
  if (test_part && sl_corpus_size(test_part.get()) > 0) {
    char* pred = nullptr;
    check(sl_decode(model.get(), test_part.get(), &feats, &pred));
    run.output("test_predictions.json", take(pred));
    run.extra["fold"] = *p.fold;
  }
}

void run_decode(Run& run) {
  const auto& p = run.plan;
  auto corpus = load_corpus(run, p.corpus);
  auto tok = load_tokenizer(run, p.tokenizer, corpus.get());
  auto table = load_embeddings(run, p.embeddings);
  run.input(p.model);
  sl_model* m = nullptr;
  check(sl_model_load(p.model.c_str(), &m));
  ModelPtr model(m);
  sl_features feats = features_of(p, table.get(), tok.get());
  char* pred = nullptr;
  check(sl_decode(model.get(), corpus.get(), &feats, &pred));
  run.output("predictions.json", take(pred));
}

void run_gradcheck(Run& run) {
  const auto& p = run.plan;
  auto corpus = load_corpus(run, p.corpus);
  auto tok = load_tokenizer(run, p.tokenizer, corpus.get());
  auto table = load_embeddings(run, p.embeddings);
  std::string config = effective_config(run, p);
  sl_features feats = features_of(p, table.get(), tok.get());
  sl_gradcheck_result r{};
  check(sl_gradcheck(corpus.get(), &feats, config.c_str(), p.batch, p.coordinates, p.seed, &r));
  bool passed = r.max_relative_error < p.tolerance;
  json j = {{"max_relative_error", r.max_relative_error},
            {"checked", r.checked},
            {"skipped", r.skipped},
            {"tolerance", p.tolerance},
            {"passed", passed}};
  run.output("gradcheck.json", j.dump(2) + "\n");
  std::cout << "max relative error " << r.max_relative_error << " over " << r.checked << " coordinates ("
            << (passed ? "ok" : "FAILED") << ")\n";
  if (!passed) {
    run.commit();
    throw DomainError("gradcheck: relative error above tolerance");
  }
}

}  // namespace

int execute(const RunPlan& plan) {
  Run run{plan, {}, {}, json::object()};
  try {
    switch (plan.subcommand) {
      case Subcommand::kStats: run_stats(run); break;
      case Subcommand::kMorph: run_morph(run); break;
      case Subcommand::kFolds: run_folds(run); break;
      case Subcommand::kSim: run_sim(run); break;
      case Subcommand::kScore: run_score(run); break;
      case Subcommand::kTtest: run_ttest(run); break;
      case Subcommand::kTrain: run_train(run); break;
      case Subcommand::kDecode: run_decode(run); break;
      case Subcommand::kGradcheck: run_gradcheck(run); break;
    }
    run.commit();
  } catch (const DomainError& e) {
    std::cerr << "seglens: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "seglens: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace seglens::cli
