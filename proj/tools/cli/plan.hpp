#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace seglens::cli {

enum class Subcommand { kStats, kMorph, kSim, kScore, kTtest, kFolds, kTrain, kDecode, kGradcheck };

const char* to_string(Subcommand s);

// Where subword pieces come from: a vocabulary or a pre-tokenized file.
struct TokenizerFlags {
  std::string vocab;
  std::string tokenization;
  std::string casing = "cased";  // normalization before lookup
  std::string name;
  size_t leading_specials = 1;
  size_t trailing_specials = 1;

  bool any() const { return !vocab.empty() || !tokenization.empty(); }
};

struct FoldFlags {
  size_t k = 10;
  double dev_fraction = 0.15;
  std::vector<std::string> fold_files;
};

struct RunPlan {
  Subcommand subcommand = Subcommand::kStats;
  std::vector<std::string> argv;
  std::string out;
  uint64_t seed = 42;

  std::string corpus;
  std::string embeddings;
  std::string casing = "cased";  // word keying for analyses
  TokenizerFlags tokenizer;
  FoldFlags folds;

  // morph
  size_t ngram = 4;
  size_t k = 25;
  size_t exclusion_top = 50;
  std::vector<size_t> thresholds = {40, 30, 20, 10};

  // sim
  std::string aggregation = "sum";
  std::string similarity_mode = "pairwise";

  // score
  std::vector<std::string> gold;
  std::vector<std::string> predictions;
  std::string model_name = "model";

  // ttest
  std::vector<double> sample_a;
  std::vector<double> sample_b;
  bool paired = false;

  // train / decode / gradcheck
  std::string config;
  std::string model;
  std::optional<size_t> fold;
  size_t batch = 4;
  size_t coordinates = 200;
  double tolerance = 1e-4;
};

// Help or a usage error: text to print and the exit status.
struct ParseExit {
  int status = 0;
  std::string text;
};

std::variant<RunPlan, ParseExit> parse_args(const std::vector<std::string>& argv);

// 0 on success, 1 on a domain error (message on stderr).
int execute(const RunPlan& plan);

}  // namespace seglens::cli
