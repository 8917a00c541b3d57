#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "seglens/error.hpp"
#include "seglens/tagger.hpp"

using namespace seglens;
using namespace seglens::tagger;
using namespace testing_helpers;

namespace {

DMatrix random_features(size_t w, size_t d, uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  DMatrix f(w, d);
  for (auto& v : f.data) v = u(rng);
  return f;
}

TaggerConfig small_config() {
  TaggerConfig c;
  c.hidden_size = 6;
  c.head_size = 5;
  c.max_span_width = 3;
  return c;
}

// Step-by-step scalar restatement of the encoder, written against block
// names only.
struct ScalarEncoder {
  const ModelParams& p;

  double w(const char* name, size_t r, size_t c) const {
    const auto& b = p.block(name);
    return b.values[r * b.cols + c];
  }
  double b(const char* name, size_t r) const { return p.block(name).values[r]; }

  void run(const DMatrix& x, DMatrix& ent, DMatrix& rel) const {
    const size_t m = p.partition_size(), d = p.input_dim();
    std::vector<double> h(m, 0.0), c(m, 0.0);
    ent = DMatrix(x.rows, 2 * m);
    rel = DMatrix(x.rows, 2 * m);
    for (size_t t = 0; t < x.rows; ++t) {
      std::vector<double> z;
      for (size_t k = 0; k < d; ++k) z.push_back(x(t, k));
      for (size_t k = 0; k < m; ++k) z.push_back(h[k]);
      auto lin = [&](const char* W, const char* B, size_t r) {
        double s = b(B, r);
        for (size_t k = 0; k < z.size(); ++k) s += w(W, r, k) * z[k];
        return s;
      };
      auto softmax_cummax = [&](const char* W, const char* B) {
        std::vector<double> s(m), out(m);
        double mx = -1e300, sum = 0.0;
        for (size_t r = 0; r < m; ++r) mx = std::max(mx, s[r] = lin(W, B, r));
        for (size_t r = 0; r < m; ++r) sum += std::exp(s[r] - mx);
        double run = 0.0;
        for (size_t r = 0; r < m; ++r) {
          run = std::max(run, std::exp(s[r] - mx) / sum);
          out[r] = run;
        }
        return out;
      };
      auto e = softmax_cummax("encoder.entity_gate.W", "encoder.entity_gate.b");
      auto rr = softmax_cummax("encoder.relation_gate.W", "encoder.relation_gate.b");
      std::vector<double> state(3 * m);
      for (size_t r = 0; r < m; ++r) {
        double cand = std::tanh(lin("encoder.candidate.W", "encoder.candidate.b", r));
        double rg = 1.0 - rr[r];
        double shared = e[r] * rg;
        double base = c[r] + cand;
        state[r] = (e[r] - shared) * base;
        state[m + r] = (rg - shared) * base;
        state[2 * m + r] = shared * base;
      }
      for (size_t r = 0; r < m; ++r) {
        double s = b("encoder.memory.b", r);
        for (size_t k = 0; k < 3 * m; ++k) s += w("encoder.memory.W", r, k) * state[k];
        c[r] = s;
        h[r] = std::tanh(s);
        ent(t, r) = std::tanh(state[r]);
        rel(t, r) = std::tanh(state[m + r]);
        ent(t, m + r) = rel(t, m + r) = std::tanh(state[2 * m + r]);
      }
    }
  }
};

Corpus toy() { return load_corpus(data_path("toy_corpus.json")); }

EmbeddingTable toy_table() {
  std::string text;
  {
    std::ifstream f(data_path("toy_word_embeddings.jsonl"));
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  return parse_embeddings_jsonl(text);
}

TaggerConfig memorize_config() {
  TaggerConfig c;
  c.hidden_size = 24;
  c.head_size = 16;
  c.learning_rate = 1e-2;
  c.batch_size = 5;
  c.epochs = 300;
  c.max_span_width = 4;
  return c;
}

}  // namespace

TEST(Config, JsonRoundTripAndValidation) {
  TaggerConfig c = memorize_config();
  c.aggregation = Aggregation::kAverage;
  TaggerConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(back.hidden_size, 24u);
  EXPECT_EQ(back.aggregation, Aggregation::kAverage);
  EXPECT_DOUBLE_EQ(back.learning_rate, 1e-2);
  EXPECT_THROW(config_from_json(R"({"hidden_size": 10})"), Error);
  EXPECT_THROW(config_from_json(R"({"hiden_size": 12})"), Error);
  EXPECT_THROW(config_from_json(R"({"threshold": 1.0})"), Error);
}

TEST(Encoder, ZeroWeightsGiveEqualTaskOutputs) {
  auto p = ModelParams::zeros(small_config(), 4);
  auto out = pfn_encode(random_features(1, 4, 1), p);
  for (size_t k = 0; k < out.entity.cols; ++k) {
    EXPECT_EQ(out.entity(0, k), out.relation(0, k));
    EXPECT_EQ(out.entity(0, k), 0.0);
  }
}

TEST(Encoder, DuplicatedSentenceGivesIdenticalRows) {
  auto p = ModelParams::random(small_config(), 4, 3);
  DMatrix f = random_features(4, 4, 9);
  auto a = pfn_encode(f, p);
  auto b = pfn_encode(f, p);
  EXPECT_EQ(a.entity.data, b.entity.data);
  EXPECT_EQ(a.relation.data, b.relation.data);
}

TEST(Encoder, MatchesScalarReference) {
  for (uint64_t seed : {1u, 2u, 3u}) {
    auto p = ModelParams::random(small_config(), 4, seed);
    DMatrix f = random_features(3, 4, static_cast<uint32_t>(seed) + 10);
    auto out = pfn_encode(f, p);
    DMatrix ent, rel;
    ScalarEncoder{p}.run(f, ent, rel);
    for (size_t i = 0; i < ent.data.size(); ++i) {
      EXPECT_NEAR(out.entity.data[i], ent.data[i], 1e-6);
      EXPECT_NEAR(out.relation.data[i], rel.data[i], 1e-6);
    }
  }
}

TEST(Encoder, MasksPartitionTheGates) {
  auto p = ModelParams::random(small_config(), 4, 8);
  auto out = pfn_encode(random_features(5, 4, 2), p);
  for (const auto& st : out.steps) {
    for (size_t i = 0; i < st.shared_mask.size(); ++i) {
      EXPECT_GE(st.entity_mask[i], -1e-12);
      EXPECT_GE(st.relation_mask[i], -1e-12);
      EXPECT_GE(st.shared_mask[i], 0.0);
    }
  }
}

TEST(Heads, ZeroWeightsGiveHalfAndNoPrediction) {
  auto cfg = small_config();
  auto p = ModelParams::zeros(cfg, 4);
  auto out = pfn_encode(random_features(3, 4, 1), p);
  for (const auto& c : score_spans(out.entity, p, 3)) EXPECT_EQ(c.probability, 0.5);
  for (const auto& c : score_pairs(out.relation, p)) EXPECT_EQ(c.probability, 0.5);
  TaggerInput in{"x", random_features(3, 4, 1), {0, 1, 2}, {}, {}};
  auto pred = decode(p, in, cfg);
  EXPECT_TRUE(pred.entities.empty());
  EXPECT_TRUE(pred.relations.empty());
}

TEST(Heads, CellEnumeration) {
  auto p = ModelParams::random(small_config(), 4, 1);
  auto two = pfn_encode(random_features(2, 4, 1), p);
  EXPECT_EQ(score_spans(two.entity, p, 2).size(), 3u * kEntityLabelCount);
  auto three = pfn_encode(random_features(3, 4, 1), p);
  EXPECT_EQ(score_pairs(three.relation, p).size(), 9u * kRelationLabelCount);
}

TEST(Inputs, SentenceAbsentFromEmbeddingsIsNamed) {
  Corpus c({sentence("missing-3", {"a"})});
  EmbeddingTable t(EmbeddingLevel::kWord);
  try {
    build_inputs(c, t, nullptr, Aggregation::kSum);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing-3"), std::string::npos);
  }
}

TEST(Inputs, SubwordSpansProjectToFirstPieces) {
  Corpus c({sentence("s", {"sodium", "polystyrene", "sulfonate"}, {drug(0, 3)})});
  TokenAlignment a = build_alignment({{"sodium"}, {"p", "##oly", "##sty", "##rene"}, {"su", "##lf", "##ona", "##te"}},
                                     {1, 1});
  EmbeddingTable t(EmbeddingLevel::kSubword);
  t.add("s", Matrix(11, 2));
  std::unordered_map<std::string, TokenAlignment> al{{"s", a}};
  auto none = build_inputs(c, t, &al, Aggregation::kNone);
  EXPECT_EQ(none[0].features.rows, 9u);
  EXPECT_EQ(none[0].word_start, (std::vector<size_t>{0, 1, 5}));
  ASSERT_EQ(none[0].gold_spans.size(), 1u);
  EXPECT_EQ(none[0].gold_spans[0].start, 0u);
  EXPECT_EQ(none[0].gold_spans[0].end, 5u);
  auto sum = build_inputs(c, t, &al, Aggregation::kSum);
  EXPECT_EQ(sum[0].features.rows, 3u);
  EXPECT_EQ(sum[0].gold_spans[0].end, 2u);
}

TEST(Checkpoint, RoundTrip) {
  auto cfg = small_config();
  auto p = ModelParams::random(cfg, 4, 5);
  auto [q, back] = decode_checkpoint(encode_checkpoint(p, cfg));
  EXPECT_EQ(back.hidden_size, cfg.hidden_size);
  ASSERT_EQ(q.parameter_count(), p.parameter_count());
  auto a = flatten(p), b = flatten(q);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(b[i], static_cast<double>(static_cast<float>(a[i])));
  std::string bytes = encode_checkpoint(p, cfg);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 2)), Error);
  EXPECT_THROW(decode_checkpoint("SLTK"), Error);
  bytes[0] = 'Z';
  EXPECT_THROW(decode_checkpoint(bytes), Error);
}

namespace {

struct Linear : Differentiable {
  std::vector<double> a{0.5, -2.0, 3.0, 1e-3};
  size_t size() const override { return a.size(); }
  double value(std::span<const double> x) const override {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += a[i] * x[i];
    return s;
  }
  void gradient(std::span<const double>, std::span<double> g) const override {
    std::copy(a.begin(), a.end(), g.begin());
  }
};

struct Corrupted : Linear {
  void gradient(std::span<const double> x, std::span<double> g) const override {
    Linear::gradient(x, g);
    g[1] *= 1.1;
  }
};

// |x0| with its sign as the piece id; points at the kink must be skipped.
struct Abs : Differentiable {
  size_t size() const override { return 1; }
  double value(std::span<const double> x) const override { return std::abs(x[0]); }
  void gradient(std::span<const double> x, std::span<double> g) const override { g[0] = x[0] >= 0 ? 1.0 : -1.0; }
  uint64_t piece(std::span<const double> x) const override { return x[0] >= 0; }
};

}  // namespace

TEST(GradCheck, LinearIsExact) {
  std::vector<double> x{1, 2, 3, 4};
  auto r = grad_check(Linear{}, x, {});
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_EQ(r.checked, 4u);
}

TEST(GradCheck, CorruptedGradientIsCaught) {
  std::vector<double> x{1, 2, 3, 4};
  EXPECT_GT(grad_check(Corrupted{}, x, {}).max_relative_error, 1e-2);
}

TEST(GradCheck, KinkIsSkipped) {
  std::vector<double> x{0.0};
  auto r = grad_check(Abs{}, x, {});
  EXPECT_EQ(r.checked, 0u);
  EXPECT_EQ(r.skipped, 1u);
}

TEST(GradCheck, FullModelAtRandomInit) {
  auto inputs = build_inputs(toy(), toy_table(), nullptr, Aggregation::kSum);
  TaggerConfig cfg = memorize_config();
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    auto p = ModelParams::random(cfg, inputs[0].features.cols, seed);
    auto r = grad_check(p, std::span(inputs).subspan(0, 2), cfg, {200, 1e-4, seed, 1e-6});
    EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
    EXPECT_GE(r.checked, 200u);
  }
}

TEST(GradCheck, CoversEveryBlock) {
  auto inputs = build_inputs(toy(), toy_table(), nullptr, Aggregation::kSum);
  TaggerConfig cfg = small_config();
  auto p = ModelParams::random(cfg, inputs[0].features.cols, 4);
  // One coordinate per block.
  auto r = grad_check(p, std::span(inputs).subspan(0, 1), cfg, {18, 1e-4, 1, 1e-6});
  EXPECT_EQ(r.checked, 18u);
}

TEST(Training, ZeroEpochsReturnsInit) {
  auto inputs = build_inputs(toy(), toy_table(), nullptr, Aggregation::kSum);
  TaggerConfig cfg = memorize_config();
  cfg.epochs = 0;
  auto init = ModelParams::random(cfg, inputs[0].features.cols, 1);
  auto r = train(init, inputs, toy(), {}, Corpus{}, cfg);
  EXPECT_EQ(flatten(r.params), flatten(init));
  EXPECT_EQ(r.log.best_epoch, 0u);
}

TEST(Training, MemorizesToyCorpusDeterministically) {
  Corpus gold = toy();
  auto inputs = build_inputs(gold, toy_table(), nullptr, Aggregation::kSum);
  TaggerConfig cfg = memorize_config();
  auto a = train(inputs, gold, {}, Corpus{}, cfg);
  auto b = train(inputs, gold, {}, Corpus{}, cfg);
  EXPECT_EQ(training_log_jsonl(a.log), training_log_jsonl(b.log));
  EXPECT_EQ(flatten(a.params), flatten(b.params));

  Prediction pred = decode_all(a.params, inputs, cfg);
  EXPECT_DOUBLE_EQ(score_ner(gold, pred).f1(), 100.0);
  EXPECT_DOUBLE_EQ(score_re(gold, pred).f1(), 100.0);

  // The gold pair outranks every other pair in the first sentence.
  auto enc = pfn_encode(inputs[0].features, a.params);
  auto pairs = score_pairs(enc.relation, a.params);
  const auto& g = inputs[0].gold_pairs[0];
  double gold_p = 0.0, best_other = 0.0;
  for (const auto& c : pairs) {
    if (c.head == g.head && c.tail == g.tail) gold_p = c.probability;
    else best_other = std::max(best_other, c.probability);
  }
  EXPECT_GT(gold_p, best_other);

  auto c = train(inputs, gold, {}, Corpus{}, [&] { auto x = cfg; x.seed = 43; return x; }());
  EXPECT_NE(training_log_jsonl(a.log), training_log_jsonl(c.log));
}

TEST(Training, NonFiniteLossReportsEpochAndBatch) {
  Corpus gold = toy();
  auto inputs = build_inputs(gold, toy_table(), nullptr, Aggregation::kSum);
  inputs[2].features(0, 0) = std::nan("");
  TaggerConfig cfg = memorize_config();
  cfg.epochs = 1;
  try {
    train(inputs, gold, {}, Corpus{}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
}
