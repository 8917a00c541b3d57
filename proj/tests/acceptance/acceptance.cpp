// One PASS/FAIL line per acceptance criterion. Criteria that need the ADE
// corpus read it from SEGLENS_ADE_CORPUS (corpus JSON) and fail when it is
// not available; a bioclinical vocabulary may be given in SEGLENS_BBERT_VOCAB.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <algorithm>
#include <memory>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "seglens/error.hpp"
#include "seglens/morph.hpp"
#include "seglens/simangle.hpp"
#include "seglens/stats.hpp"
#include "seglens/tagger.hpp"
#include "seglens/wordpiece.hpp"

using namespace seglens;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string data(const std::string& name) { return std::string(SEGLENS_TEST_DATA) + "/" + name; }

std::string fmt(double v, int digits = 2) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

std::shared_ptr<Corpus> ade() {
  static std::shared_ptr<Corpus> cached;
  static bool tried = false;
  if (!tried) {
    tried = true;
    const char* path = std::getenv("SEGLENS_ADE_CORPUS");
    if (path && *path) cached = std::make_shared<Corpus>(load_corpus(path));
  }
  return cached;
}

std::shared_ptr<const Vocab> cased_vocab() {
  static auto v = std::make_shared<const Vocab>(load_vocab(data("bert-base-cased-vocab.txt")));
  return v;
}

Outcome no_corpus() {
  return {false, "ADE corpus not available (set SEGLENS_ADE_CORPUS to a corpus JSON)"};
}

std::string sci(double v) {
  std::ostringstream o;
  o.precision(2);
  o << std::scientific << v;
  return o.str();
}

bool within_rel(double got, double want, double tol) { return std::abs(got - want) <= tol * std::abs(want); }

Outcome sentence_lengths() {
  auto corpus = ade();
  if (!corpus) return no_corpus();
  auto t0 = Clock::now();
  WordPieceSource bert(cased_vocab(), Casing::kCased, "BERT");
  auto a = sentence_stats(*corpus, bert);

  std::shared_ptr<const Vocab> bvocab = cased_vocab();
  Casing bcasing = Casing::kUncased;
  if (const char* p = std::getenv("SEGLENS_BBERT_VOCAB"); p && *p) {
    bvocab = std::make_shared<const Vocab>(load_vocab(p));
    bcasing = Casing::kCased;
  }
  WordPieceSource bbert(bvocab, bcasing, "b-BERT");
  auto b = sentence_stats(*corpus, bbert);
  double secs = seconds_since(t0);

  bool ok = within_rel(a.mean_before, 21.23, 0.005) && within_rel(a.mean_after, 33.56, 0.005) &&
            within_rel(b.mean_before, 21.23, 0.005) && within_rel(b.mean_after, 33.1, 0.005) && secs < 10.0;
  return {ok, "BERT " + fmt(a.mean_before) + " -> " + fmt(a.mean_after) + " (+" + fmt(a.pct_increase(), 1) +
                  "%), b-BERT " + fmt(b.mean_before) + " -> " + fmt(b.mean_after) + " (+" +
                  fmt(b.pct_increase(), 1) + "%), " + fmt(secs) + " s"};
}

Outcome entity_lengths() {
  auto corpus = ade();
  if (!corpus) return no_corpus();
  WordPieceSource bert(cased_vocab(), Casing::kCased, "BERT");
  auto drug = entity_stats(*corpus, bert, EntityLabel::kDrug, Casing::kCased);
  auto ae = entity_stats(*corpus, bert, EntityLabel::kAdverseEffect, Casing::kCased);
  double out = out_word_stats(*corpus, bert, Casing::kCased);
  auto near = [](double got, double want) { return std::abs(got - want) <= 0.02; };
  bool ok = near(drug.entity.mean_before, 1.37) && near(drug.entity.mean_after, 4.78) && near(drug.word_mean, 3.92) &&
            near(ae.entity.mean_before, 2.66) && near(ae.entity.mean_after, 6.00) && near(ae.word_mean, 2.81) &&
            near(out, 2.11);
  return {ok, "Drug " + fmt(drug.entity.mean_before) + " -> " + fmt(drug.entity.mean_after) + " word " +
                  fmt(drug.word_mean) + "; AdverseEffect " + fmt(ae.entity.mean_before) + " -> " +
                  fmt(ae.entity.mean_after) + " word " + fmt(ae.word_mean) + "; Out word " + fmt(out)};
}

std::string counts(const std::vector<size_t>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "/" : "") + std::to_string(v[i]);
  return s;
}

Outcome threshold_counts() {
  auto corpus = ade();
  if (!corpus) return no_corpus();
  auto m = run_morph(*corpus, {});
  auto d = m.reports[0].threshold_counts, a = m.reports[1].threshold_counts;
  bool ok = d == std::vector<size_t>{0, 3, 11, 25} && a == std::vector<size_t>{5, 8, 19, 25};
  return {ok, "Drug " + counts(d) + ", AdverseEffect " + counts(a)};
}

Outcome suffix_membership() {
  auto corpus = ade();
  if (!corpus) return no_corpus();
  auto m = run_morph(*corpus, {});
  std::string detail;
  bool ok = true;
  auto require = [&](const TopKReport& r, std::initializer_list<const char*> grams) {
    for (const char* g : grams) {
      size_t c = 0;
      for (const auto& x : r.top) {
        if (x.ngram == g) c = x.count;
      }
      ok = ok && c > 20;
      detail += std::string(detail.empty() ? "" : ", ") + g + "=" + std::to_string(c);
    }
  };
  require(m.reports[0], {"amin", "mine", "mide"});
  require(m.reports[1], {"itis", "osis", "emia"});
  return {ok, detail};
}

Outcome scorer_oracle() {
  std::mt19937 rng(5);
  auto pick = [&](size_t n) { return static_cast<size_t>(rng() % n); };
  auto t0 = Clock::now();
  size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto entities = [&] {
      std::vector<EntityMention> e;
      size_t n = pick(7);
      for (size_t i = 0; i < n; ++i) {
        size_t a = pick(5);
        e.push_back({pick(2) ? EntityLabel::kDrug : EntityLabel::kAdverseEffect, a, a + 1 + pick(2)});
      }
      return e;
    };
    auto relations = [&](size_t ents) {
      std::vector<RelationMention> r;
      if (ents == 0) return r;
      size_t n = pick(5);
      if (ents < 2) return r;
      for (size_t i = 0; i < n; ++i) {
        size_t h = pick(ents), t = pick(ents - 1);
        r.push_back({RelationLabel::kAdverseEffectOf, h, t >= h ? t + 1 : t});
      }
      return r;
    };
    auto ge = entities(), pe = entities();
    Corpus gold({Sentence{"s", {"a", "b", "c", "d", "e", "f", "g"}, ge, relations(ge.size())}});
    Prediction pred;
    pred.sentences.push_back({"s", pe, relations(pe.size())});
    auto n = score_ner(gold, pred), r = score_re(gold, pred);
    auto on = oracle::brute_force_ner(gold, pred), orr = oracle::brute_force_re(gold, pred);
    if (n.true_positives != on.tp || n.predicted != on.predicted || n.gold != on.gold ||
        r.true_positives != orr.tp || r.predicted != orr.predicted || r.gold != orr.gold) {
      ++mismatches;
    }
  }
  double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0, std::to_string(mismatches) + " mismatches in 1000 instances, " + fmt(secs) + " s"};
}

Outcome aggregation_identities() {
  std::mt19937 rng(6);
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  double worst = 0.0;
  bool identity = true;
  for (int trial = 0; trial < 1000; ++trial) {
    size_t words = 1 + rng() % 8, lead = rng() % 3, trail = rng() % 3, dim = 1 + rng() % 12;
    std::vector<std::vector<std::string>> pieces(words);
    for (auto& w : pieces) w.assign(1 + rng() % 5, "x");
    auto a = build_alignment(pieces, {lead, trail});
    Matrix m(a.total_positions(), dim);
    for (auto& v : m.data) v = u(rng);
    Matrix sum = aggregate_embeddings(m, a, Aggregation::kSum);
    Matrix avg = aggregate_embeddings(m, a, Aggregation::kAverage);
    for (size_t w = 0; w < words; ++w) {
      double count = static_cast<double>(pieces[w].size());
      for (size_t d = 0; d < dim; ++d) {
        double s = sum(w, d), ac = avg(w, d) * count;
        double denom = std::max({std::abs(s), std::abs(ac), 1e-6});
        worst = std::max(worst, std::abs(s - ac) / denom);
        if (count == 1 && (sum(w, d) != m(a.words[w].first, d) || avg(w, d) != m(a.words[w].first, d))) {
          identity = false;
        }
      }
    }
  }
  return {worst <= 1e-5 && identity,
          "max relative gap " + sci(worst) + ", one-piece identity " + (identity ? "exact" : "broken")};
}

Outcome round_trip() {
  auto corpus = ade();
  if (!corpus) return no_corpus();
  const auto& vocab = *cased_vocab();
  size_t words = 0, unk = 0, broken = 0;
  std::string example;
  for (const auto& s : corpus->sentences()) {
    for (const auto& w : s.words) {
      auto pieces = tokenize_word(w, vocab);
      if (std::find(pieces.begin(), pieces.end(), vocab.unk_token()) != pieces.end()) {
        ++unk;
        continue;
      }
      ++words;
      if (detokenize(pieces, vocab) != w) {
        ++broken;
        if (example.empty()) example = w;
      }
    }
  }
  return {broken == 0, std::to_string(words) + " words, " + std::to_string(unk) + " unk skipped, " +
                           std::to_string(broken) + " mismatches" + (example.empty() ? "" : " (e.g. " + example + ")")};
}

std::vector<tagger::TaggerInput> toy_inputs(const Corpus& c) {
  return tagger::build_inputs(c, load_embeddings(data("toy_word_embeddings.jsonl")), nullptr, Aggregation::kSum);
}

tagger::TaggerConfig toy_config() {
  std::ifstream f(std::string(SEGLENS_CONFIGS) + "/toy_memorize.json");
  std::stringstream ss;
  ss << f.rdbuf();
  return tagger::config_from_json(ss.str());
}

// Tagger loss with a deliberately wrong gradient.
struct ScaledGradient : tagger::Differentiable {
  const tagger::ModelParams& shape;
  std::span<const tagger::TaggerInput> batch;
  const tagger::TaggerConfig& config;
  double scale;

  ScaledGradient(const tagger::ModelParams& p, std::span<const tagger::TaggerInput> b, const tagger::TaggerConfig& c,
                 double s)
      : shape(p), batch(b), config(c), scale(s) {}

  tagger::ModelParams load(std::span<const double> x) const {
    auto p = shape;
    tagger::unflatten(x, p);
    return p;
  }
  size_t size() const override { return shape.parameter_count(); }
  double value(std::span<const double> x) const override {
    return tagger::batch_loss(load(x), batch, config, nullptr);
  }
  void gradient(std::span<const double> x, std::span<double> out) const override {
    auto p = load(x);
    auto g = p.zeros_like();
    tagger::batch_loss(p, batch, config, &g);
    auto flat = tagger::flatten(g);
    for (size_t i = 0; i < flat.size(); ++i) out[i] = scale * flat[i];
  }
};

Outcome gradient_check() {
  Corpus toy = load_corpus(data("toy_corpus.json"));
  auto inputs = toy_inputs(toy);
  auto cfg = toy_config();
  std::span<const tagger::TaggerInput> batch(inputs.data(), 4);
  double worst = 0.0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    auto p = tagger::ModelParams::random(cfg, inputs[0].features.cols, seed);
    auto r = tagger::grad_check(p, batch, cfg, {200, 1e-4, seed, 1e-6});
    worst = std::max(worst, r.max_relative_error);
  }
  auto p = tagger::ModelParams::random(cfg, inputs[0].features.cols, 1);
  auto x = tagger::flatten(p);
  auto bad = tagger::grad_check(ScaledGradient(p, batch, cfg, 1.05), x, {200, 1e-4, 1, 1e-6});
  bool ok = worst < 1e-4 && bad.max_relative_error >= 1e-4;
  return {ok, "max relative error " + sci(worst) + " over 5 seeds; corrupted control " +
                  sci(bad.max_relative_error)};
}

Outcome memorization() {
  Corpus toy = load_corpus(data("toy_corpus.json"));
  auto inputs = toy_inputs(toy);
  auto cfg = toy_config();
  auto t0 = Clock::now();
  auto a = tagger::train(inputs, toy, {}, Corpus{}, cfg);
  auto b = tagger::train(inputs, toy, {}, Corpus{}, cfg);
  double secs = seconds_since(t0);
  auto pred = tagger::decode_all(a.params, inputs, cfg);
  double ner = score_ner(toy, pred).f1(), re = score_re(toy, pred).f1();
  bool same = tagger::training_log_jsonl(a.log) == tagger::training_log_jsonl(b.log) &&
              tagger::flatten(a.params) == tagger::flatten(b.params);
  bool ok = ner == 100.0 && re == 100.0 && same && cfg.epochs <= 300 && secs < 60.0;
  return {ok, "NER " + fmt(ner, 1) + ", RE " + fmt(re, 1) + " at epoch " + std::to_string(a.log.best_epoch) +
                  ", repeat run " + (same ? "identical" : "differs") + ", " + fmt(secs) + " s for two runs"};
}

Outcome similarity_properties() {
  std::mt19937 rng(10);
  std::normal_distribution<float> g(0.0f, 1.0f);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    size_t n = 2 + rng() % 6, dim = 2 + rng() % 10;
    Matrix m(n, dim), each(n, dim), common(n, dim), permuted(n, dim);
    for (auto& v : m.data) v = g(rng);
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const float c = 0.1f + static_cast<float>(rng() % 100);
    for (size_t i = 0; i < n; ++i) {
      float s = 0.1f + static_cast<float>(rng() % 100);
      for (size_t d = 0; d < dim; ++d) {
        each(i, d) = s * m(i, d);
        common(i, d) = c * m(i, d);
        permuted(i, d) = m(perm[i], d);
      }
    }
    EntityGroup grp{EntityLabel::kDrug, GroupPosition::kStart, {}};
    for (size_t i = 0; i < n; ++i) grp.members.push_back({"s", i});
    auto score = [&](const Matrix& mat, SimilarityMode mode) {
      EmbeddingTable t(EmbeddingLevel::kWord);
      t.add("s", mat);
      return *group_similarity(grp, t, mode).score;
    };
    // Pairwise cosine ignores each member's norm; the centroid only a common one.
    double pw = score(m, SimilarityMode::kPairwise);
    worst = std::max({worst, std::abs(pw - score(each, SimilarityMode::kPairwise)),
                      std::abs(pw - score(common, SimilarityMode::kPairwise)),
                      std::abs(pw - score(permuted, SimilarityMode::kPairwise))});
    double ce = score(m, SimilarityMode::kCentroid);
    worst = std::max({worst, std::abs(ce - score(common, SimilarityMode::kCentroid)),
                      std::abs(ce - score(permuted, SimilarityMode::kCentroid))});
  }
  EmbeddingTable hand(EmbeddingLevel::kWord);
  Matrix three(3, 2);
  three(0, 0) = 1;
  three(1, 1) = 1;
  three(2, 0) = three(2, 1) = 1;
  hand.add("h", three);
  double h = *group_similarity({EntityLabel::kDrug, GroupPosition::kStart, {{"h", 0}, {"h", 1}, {"h", 2}}}, hand).score;
  bool ok = worst <= 1e-6 * 100 && std::abs(h - 47.14) <= 0.01;
  return {ok, "max invariance gap " + sci(worst / 100) + " (cosine units); 3-vector example " + fmt(h)};
}

Outcome t_test() {
  auto same = welch_ttest({70, 72, 74}, {70, 72, 74});
  std::mt19937 rng(11);
  std::normal_distribution<double> g(60.0, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> a(3 + rng() % 8), b(3 + rng() % 8);
    double shift = (rng() % 7) * 1.5;
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng) + shift;
    auto got = welch_ttest(a, b);
    auto want = oracle::welch(a, b);
    worst = std::max(worst, std::abs(got.p - want.p));
  }
  bool ok = same.p == 1.0 && worst <= 1e-6;
  return {ok, "identical samples p = " + fmt(same.p, 3) + "; max |p - integrated p| " + sci(worst)};
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria = {
      sentence_lengths, entity_lengths, threshold_counts,     suffix_membership,     scorer_oracle, aggregation_identities,
      round_trip,       gradient_check, memorization,         similarity_properties, t_test,
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ")\n";
  }
  return failures == 0 ? 0 : 1;
}
