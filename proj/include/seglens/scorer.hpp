#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seglens/corpus.hpp"

namespace seglens {

struct SentencePrediction {
  std::string id;
  std::vector<EntityMention> entities;
  std::vector<RelationMention> relations;  // index into `entities`
};

struct Prediction {
  std::vector<SentencePrediction> sentences;
};

// Prediction files share the corpus JSON schema.
Prediction prediction_from_corpus(const Corpus& corpus);
Prediction load_prediction(const std::filesystem::path& path);
// Emits the corpus schema, taking tokens from `gold`.
std::string serialize_prediction(const Prediction& pred, const Corpus& gold);

struct MetricRow {
  size_t true_positives = 0;
  size_t predicted = 0;
  size_t gold = 0;

  // Percentages, unrounded.
  double precision() const;
  double recall() const;
  double f1() const;
};

// Strict micro-averaged scores. Predicted duplicates count once; each gold
// item is matched at most once. The prediction must cover exactly the gold
// sentence ids.
MetricRow score_ner(const Corpus& gold, const Prediction& pred);
MetricRow score_re(const Corpus& gold, const Prediction& pred);

struct FoldSummary {
  double mean = 0.0;
  std::optional<double> stddev;  // sample std, absent for a single fold
};

FoldSummary fold_summary(const std::vector<double>& values);

// "89.2 ± 1.3", or "89.2" when std is absent.
std::string format_summary(const FoldSummary& s);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  bool significant = false;  // p <= 0.05
};

// Unpaired: Welch's two-sided test. Paired: one-sample test on differences.
TTestResult welch_ttest(const std::vector<double>& a,
                        const std::vector<double>& b, bool paired = false);

// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees
// of freedom, via the regularized incomplete beta function.
double student_t_two_sided_p(double t, double df);

// Regularized incomplete beta I_x(a, b).
double regularized_incomplete_beta(double x, double a, double b);

struct ScoreRow {
  std::string model;
  std::string aggregation;
  std::vector<double> ner_f1;  // per fold
  std::vector<double> re_f1;
};

// model,aggregation,fold,ner_f1,re_f1: one row per fold, then mean and std.
std::string score_csv(const std::vector<ScoreRow>& rows);
// Fixed-width table: model | aggregation | NER | RE.
std::string score_table(const std::vector<ScoreRow>& rows);

}  // namespace seglens
