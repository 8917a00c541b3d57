#pragma once

// Joint entity/relation tagger over frozen embeddings.
//
// The encoder is a recurrent partition filter. At step t, with input x_t and
// previous hidden h and memory c (each m = hidden_size / 3 wide):
//
//   z      = [x_t; h]
//   cand   = tanh(W_c z + b_c)
//   e      = cummax(softmax(W_e z + b_e))          entity gate
//   r      = 1 - cummax(softmax(W_r z + b_r))      relation gate
//   shared = e * r,  ent = e - shared,  rel = r - shared
//   mu_k   = mask_k * (c + cand)                   k in {ent, rel, shared}
//   state  = [mu_ent; mu_rel; mu_shared]           three disjoint blocks
//   c'     = W_m state + b_m,  h' = tanh(c')
//
// Entity features are tanh([mu_ent; mu_shared]) and relation features are
// tanh([mu_rel; mu_shared]), both 2m wide. Because cummax is monotone the
// gates form nested masks: coordinates early in e are entity-only, late in
// r are relation-only, and the overlap is shared.
//
// The NER unit scores every span (i, j), j - i < max_span_width, per entity
// label with sigmoid(V tanh(U_s f_i + U_e f_j + b) + c). The RE unit scores
// every ordered position pair the same way per relation label; a relation
// between two entities is read off the pair of their start positions.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seglens/align.hpp"
#include "seglens/corpus.hpp"
#include "seglens/scorer.hpp"

namespace seglens::tagger {

inline constexpr size_t kEntityLabelCount = 2;
inline constexpr size_t kRelationLabelCount = 1;

struct TaggerConfig {
  size_t hidden_size = 48;
  // Width of the hidden layer of the NER and RE units; 0 means hidden_size.
  size_t head_size = 0;
  Aggregation aggregation = Aggregation::kSum;
  double learning_rate = 2e-5;
  size_t batch_size = 20;
  size_t epochs = 100;
  uint64_t seed = 42;
  double threshold = 0.5;
  // In positions (words, or subwords when aggregation is none).
  size_t max_span_width = 8;
  // Scale positive cells by this factor in the loss; 1 means unweighted.
  double positive_weight = 1.0;

  // Throws seglens::Error when invariants fail.
  void validate() const;
  size_t partition_size() const { return hidden_size / 3; }
  size_t effective_head_size() const {
    return head_size == 0 ? hidden_size : head_size;
  }
};

std::string config_to_json(const TaggerConfig& config);
TaggerConfig config_from_json(std::string_view json_text);

// Row-major matrix of doubles used inside the model.
struct DMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  DMatrix() = default;
  DMatrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(size_t i, size_t j) { return data[i * cols + j]; }
  double operator()(size_t i, size_t j) const { return data[i * cols + j]; }
  std::span<double> row(size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(size_t i) const {
    return {data.data() + i * cols, cols};
  }
};

struct ParamBlock {
  std::string name;
  size_t rows = 0;
  size_t cols = 0;  // 1 for bias vectors
  std::vector<double> values;
};

class ModelParams {
 public:
  ModelParams() = default;

  // Xavier-uniform weights, zero biases.
  static ModelParams random(const TaggerConfig& config, size_t input_dim,
                            uint64_t seed);
  static ModelParams zeros(const TaggerConfig& config, size_t input_dim);

  size_t input_dim() const { return input_dim_; }
  size_t partition_size() const { return partition_; }
  size_t head_size() const { return head_; }

  std::vector<ParamBlock>& blocks() { return blocks_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(std::string_view name) const;
  ParamBlock& block(std::string_view name);

  size_t parameter_count() const;
  bool all_finite() const;

  // Same shapes, all zero.
  ModelParams zeros_like() const;

 private:
  ModelParams(size_t input_dim, size_t partition, size_t head);

  size_t input_dim_ = 0;
  size_t partition_ = 0;
  size_t head_ = 0;
  std::vector<ParamBlock> blocks_;
};

// Per-step partition masks and state, kept for inspection and backprop.
struct PartitionStep {
  std::vector<double> entity_mask;    // m
  std::vector<double> relation_mask;  // m
  std::vector<double> shared_mask;    // m
  std::vector<double> state;          // 3m: [entity | relation | shared]
  std::vector<double> memory;         // m
  // Index chosen by each cummax output, used to detect kinks.
  std::vector<uint16_t> entity_argmax;
  std::vector<uint16_t> relation_argmax;
};

struct EncoderOutput {
  DMatrix entity;    // W x 2m
  DMatrix relation;  // W x 2m
  std::vector<PartitionStep> steps;
};

EncoderOutput pfn_encode(const DMatrix& features, const ModelParams& params);

struct SpanCell {
  size_t start = 0;
  size_t end = 0;  // inclusive
  size_t label = 0;
  double probability = 0.0;
};

struct PairCell {
  size_t head = 0;
  size_t tail = 0;
  size_t label = 0;
  double probability = 0.0;
};

// Every span with end - start < max_width, for every entity label.
std::vector<SpanCell> score_spans(const DMatrix& entity_features,
                                  const ModelParams& params, size_t max_width);
// Every ordered position pair (including i == j), for every relation label.
std::vector<PairCell> score_pairs(const DMatrix& relation_features,
                                  const ModelParams& params);

// One sentence, ready for the model: features in position space plus gold
// cells and the mapping back to words.
struct TaggerInput {
  std::string id;
  DMatrix features;
  // Position of each word's first subword (identity at word level).
  std::vector<size_t> word_start;
  std::vector<SpanCell> gold_spans;
  std::vector<PairCell> gold_pairs;
};

// Builds inputs for every sentence of the corpus. At word level the table is
// used as is; subword tables are aggregated (sum/average) or, for
// aggregation none, trimmed of special rows with spans projected onto the
// first subword of their boundary words.
std::vector<TaggerInput> build_inputs(
    const Corpus& corpus, const EmbeddingTable& table,
    const std::unordered_map<std::string, TokenAlignment>* alignments,
    Aggregation aggregation);

// Summed binary cross-entropy over span and pair cells of one sentence.
// Adds d(loss)/d(params) into `grads` when non-null.
double sentence_loss(const ModelParams& params, const TaggerInput& input,
                     const TaggerConfig& config, ModelParams* grads);

double batch_loss(const ModelParams& params,
                  std::span<const TaggerInput> batch,
                  const TaggerConfig& config, ModelParams* grads);

SentencePrediction decode(const ModelParams& params, const TaggerInput& input,
                          const TaggerConfig& config);

Prediction decode_all(const ModelParams& params,
                      std::span<const TaggerInput> inputs,
                      const TaggerConfig& config);

struct EpochRecord {
  size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean loss per sentence
  double dev_ner_f1 = 0.0;
  double dev_re_f1 = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  size_t best_epoch = 0;  // 0 when no epoch ran
  std::string pairing = "start-word";
};

struct TrainResult {
  ModelParams params;
  TrainingLog log;
};

// Adam over shuffled mini-batches; keeps the parameters of the epoch with the
// best mean of dev NER and RE F1 (earliest on ties). When `dev` is empty the
// training inputs are used for selection.
TrainResult train(std::span<const TaggerInput> train_inputs,
                  const Corpus& train_gold, std::span<const TaggerInput> dev,
                  const Corpus& dev_gold, const TaggerConfig& config);

// Same, starting from given parameters.
TrainResult train(ModelParams init, std::span<const TaggerInput> train_inputs,
                  const Corpus& train_gold, std::span<const TaggerInput> dev,
                  const Corpus& dev_gold, const TaggerConfig& config);

// {"epoch","train_loss","dev_ner_f1","dev_re_f1"} per line.
std::string training_log_jsonl(const TrainingLog& log);

// Generic finite-difference check over a flat parameter vector.
struct GradCheckOptions {
  size_t coordinates = 200;
  double step = 1e-4;
  uint64_t seed = 7;
  // |a - n| / max(|a|, |n|, floor)
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  size_t checked = 0;
  // Coordinates skipped because the perturbation crossed a cummax kink.
  size_t skipped = 0;
};

struct Differentiable {
  virtual ~Differentiable() = default;
  virtual size_t size() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual void gradient(std::span<const double> x,
                        std::span<double> out) const = 0;
  // Piecewise-smooth functions return an id of the active piece; a
  // coordinate whose +h and -h evaluations land on different pieces is
  // resampled.
  virtual uint64_t piece(std::span<const double> x) const {
    (void)x;
    return 0;
  }
};

GradCheckResult grad_check(const Differentiable& f, std::span<const double> x,
                           const GradCheckOptions& options);

// Checks the tagger's analytic gradient on one batch, drawing coordinates
// from every parameter block.
GradCheckResult grad_check(const ModelParams& params,
                           std::span<const TaggerInput> batch,
                           const TaggerConfig& config,
                           const GradCheckOptions& options = {});

std::vector<double> flatten(const ModelParams& params);
void unflatten(std::span<const double> flat, ModelParams& params);

// Versioned binary checkpoint: "SLTK", u32 version, config JSON, then named
// blocks of little-endian floats.
std::string encode_checkpoint(const ModelParams& params,
                              const TaggerConfig& config);
std::pair<ModelParams, TaggerConfig> decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path,
                     const ModelParams& params, const TaggerConfig& config);
std::pair<ModelParams, TaggerConfig> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace seglens::tagger
