#include <cmath>
#include <sstream>

#include "io.hpp"
#include "json.hpp"
#include "model.hpp"
#include "seglens/error.hpp"

namespace seglens::tagger {

using namespace detail;

namespace {

const char* kModule = "tagger";

DMatrix to_double(const Matrix& m, size_t first_row, size_t rows) {
  DMatrix out(rows, m.cols);
  for (size_t r = 0; r < rows; ++r) {
    auto src = m.row(first_row + r);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

void add_gold(const Sentence& s, TaggerInput& in) {
  for (const auto& e : s.entities) {
    in.gold_spans.push_back({in.word_start[e.start], in.word_start[e.end - 1],
                             static_cast<size_t>(e.label), 1.0});
  }
  for (const auto& r : s.relations) {
    in.gold_pairs.push_back({in.word_start[s.entities[r.head].start],
                             in.word_start[s.entities[r.tail].start],
                             static_cast<size_t>(r.label), 1.0});
  }
}

struct Adam {
  explicit Adam(size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& x, const std::vector<double>& g, double lr) {
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    ++t;
    double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    for (size_t i = 0; i < x.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }

  std::vector<double> m, v;
  size_t t = 0;
};

}  // namespace

std::vector<TaggerInput> build_inputs(const Corpus& corpus, const EmbeddingTable& table,
                                      const std::unordered_map<std::string, TokenAlignment>* alignments,
                                      Aggregation aggregation) {
  std::vector<TaggerInput> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences()) {
    if (!table.contains(s.id)) {
      throw Error(ErrorKind::kValidation, kModule, "sentence " + s.id + " absent from embeddings");
    }
    const Matrix& m = table.at(s.id);
    TaggerInput in;
    in.id = s.id;
    if (table.level() == EmbeddingLevel::kWord) {
      if (m.rows != s.words.size()) {
        throw Error(ErrorKind::kValidation, kModule,
                    "sentence " + s.id + ": " + std::to_string(m.rows) + " word vectors for " +
                        std::to_string(s.words.size()) + " words");
      }
      in.features = to_double(m, 0, m.rows);
      for (size_t w = 0; w < s.words.size(); ++w) in.word_start.push_back(w);
    } else {
      if (!alignments) {
        throw Error(ErrorKind::kArgument, kModule, "subword embeddings need a tokenization to align words");
      }
      auto it = alignments->find(s.id);
      if (it == alignments->end()) {
        throw Error(ErrorKind::kValidation, kModule, "no alignment for sentence " + s.id);
      }
      const auto& a = it->second;
      if (a.word_count() != s.words.size() || m.rows != a.total_positions()) {
        throw Error(ErrorKind::kValidation, kModule,
                    "sentence " + s.id + ": " + std::to_string(m.rows) +
                        " subword vectors do not match the alignment (" +
                        std::to_string(a.total_positions()) + " positions)");
      }
      if (aggregation == Aggregation::kNone) {
        size_t body = a.total_positions() - a.leading_specials - a.trailing_specials;
        in.features = to_double(m, a.leading_specials, body);
        for (const auto& r : a.words) in.word_start.push_back(r.first - a.leading_specials);
      } else {
        Matrix words = aggregate_embeddings(m, a, aggregation);
        in.features = to_double(words, 0, words.rows);
        for (size_t w = 0; w < s.words.size(); ++w) in.word_start.push_back(w);
      }
    }
    add_gold(s, in);
    out.push_back(std::move(in));
  }
  return out;
}

double sentence_loss(const ModelParams& params, const TaggerInput& input,
                     const TaggerConfig& config, ModelParams* grads) {
  EncoderOutput enc = pfn_encode(input.features, params);
  if (!grads) {
    return ner_loss(enc.entity, params, input, config, nullptr, nullptr) +
           re_loss(enc.relation, params, input, config, nullptr, nullptr);
  }
  FeatureGrads df{DMatrix(enc.entity.rows, enc.entity.cols),
                  DMatrix(enc.relation.rows, enc.relation.cols)};
  double loss = ner_loss(enc.entity, params, input, config, &df.entity, grads) +
                re_loss(enc.relation, params, input, config, &df.relation, grads);
  pfn_backward(input.features, params, df, *grads);
  return loss;
}

double batch_loss(const ModelParams& params, std::span<const TaggerInput> batch,
                  const TaggerConfig& config, ModelParams* grads) {
  double loss = 0.0;
  for (const auto& in : batch) loss += sentence_loss(params, in, config, grads);
  return loss;
}

SentencePrediction decode(const ModelParams& params, const TaggerInput& input,
                          const TaggerConfig& config) {
  SentencePrediction out;
  out.id = input.id;
  EncoderOutput enc = pfn_encode(input.features, params);

  // Position -> word for positions that open a word.
  std::vector<long> word_at(input.features.rows, -1);
  for (size_t w = 0; w < input.word_start.size(); ++w) word_at[input.word_start[w]] = static_cast<long>(w);

  for (const auto& cell : score_spans(enc.entity, params, config.max_span_width)) {
    if (!(cell.probability > config.threshold)) continue;
    long first = word_at[cell.start];
    long last = word_at[cell.end];
    if (first < 0 || last < 0) continue;
    out.entities.push_back({static_cast<EntityLabel>(cell.label), static_cast<size_t>(first),
                            static_cast<size_t>(last) + 1});
  }
  if (out.entities.size() < 2) return out;

  auto pairs = score_pairs(enc.relation, params);
  const size_t w = input.features.rows;
  for (size_t a = 0; a < out.entities.size(); ++a) {
    for (size_t b = 0; b < out.entities.size(); ++b) {
      if (a == b) continue;
      size_t pa = input.word_start[out.entities[a].start];
      size_t pb = input.word_start[out.entities[b].start];
      for (size_t lab = 0; lab < kRelationLabelCount; ++lab) {
        const auto& cell = pairs[(pa * w + pb) * kRelationLabelCount + lab];
        if (cell.probability > config.threshold) {
          out.relations.push_back({static_cast<RelationLabel>(lab), a, b});
        }
      }
    }
  }
  return out;
}

Prediction decode_all(const ModelParams& params, std::span<const TaggerInput> inputs,
                      const TaggerConfig& config) {
  Prediction p;
  p.sentences.reserve(inputs.size());
  for (const auto& in : inputs) p.sentences.push_back(decode(params, in, config));
  return p;
}

TrainResult train(std::span<const TaggerInput> train_inputs, const Corpus& train_gold,
                  std::span<const TaggerInput> dev, const Corpus& dev_gold,
                  const TaggerConfig& config) {
  config.validate();
  if (train_inputs.empty()) throw Error(ErrorKind::kArgument, kModule, "no training sentences");
  auto init = ModelParams::random(config, train_inputs.front().features.cols, config.seed);
  return train(std::move(init), train_inputs, train_gold, dev, dev_gold, config);
}

TrainResult train(ModelParams init, std::span<const TaggerInput> train_inputs,
                  const Corpus& train_gold, std::span<const TaggerInput> dev,
                  const Corpus& dev_gold, const TaggerConfig& config) {
  config.validate();
  TrainResult result{init, {}};
  if (config.epochs == 0) return result;
  if (train_inputs.empty()) throw Error(ErrorKind::kArgument, kModule, "no training sentences");

  std::span<const TaggerInput> select = dev.empty() ? train_inputs : dev;
  const Corpus& select_gold = dev.empty() ? train_gold : dev_gold;

  ModelParams params = std::move(init);
  ModelParams grads = params.zeros_like();
  std::vector<double> flat = flatten(params);
  Adam adam(flat.size());
  seglens::detail::Rng rng(config.seed ^ 0x5EED5EEDULL);
  std::vector<size_t> order(train_inputs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best = -1.0;
  std::vector<TaggerInput> batch;
  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      size_t stop = std::min(order.size(), start + config.batch_size);
      grads = params.zeros_like();
      double loss = 0.0;
      for (size_t i = start; i < stop; ++i) {
        loss += sentence_loss(params, train_inputs[order[i]], config, &grads);
      }
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::kNumeric, kModule,
                    "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                        std::to_string(b));
      }
      epoch_loss += loss;
      adam.step(flat, flatten(grads), config.learning_rate);
      unflatten(flat, params);
    }

    Prediction pred = decode_all(params, select, config);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(train_inputs.size());
    rec.dev_ner_f1 = score_ner(select_gold, pred).f1();
    rec.dev_re_f1 = score_re(select_gold, pred).f1();
    result.log.epochs.push_back(rec);
    double mean = 0.5 * (rec.dev_ner_f1 + rec.dev_re_f1);
    if (mean > best) {
      best = mean;
      result.params = params;
      result.log.best_epoch = epoch;
    }
  }
  return result;
}

std::string training_log_jsonl(const TrainingLog& log) {
  std::string out;
  for (const auto& r : log.epochs) {
    nlohmann::json j = {{"epoch", r.epoch},
                        {"train_loss", r.train_loss},
                        {"dev_ner_f1", r.dev_ner_f1},
                        {"dev_re_f1", r.dev_re_f1}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace seglens::tagger
