#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seglens/corpus.hpp"
#include "seglens/wordpiece.hpp"

namespace seglens {

// Means before and after tokenization. Values are unrounded; rounding happens
// when a report is rendered.
struct LengthReport {
  std::string population;
  double mean_before = 0.0;
  double mean_after = 0.0;

  double pct_increase() const;
};

enum class Weighting {
  kUnique,      // each unique surface/word counts once
  kOccurrence,  // each occurrence counts (diagnostic)
};

// Special tokens are never counted.
LengthReport sentence_stats(const Corpus& corpus, const PieceSource& source);

struct EntityStats {
  LengthReport entity;
  // Mean pieces per unique word of the type.
  double word_mean = 0.0;
};

EntityStats entity_stats(const Corpus& corpus, const PieceSource& source,
                         EntityLabel label, Casing casing,
                         Weighting weighting = Weighting::kUnique);

double out_word_stats(const Corpus& corpus, const PieceSource& source,
                      Casing casing, Weighting weighting = Weighting::kUnique);

struct StatsRow {
  std::string tokenizer;
  std::string population;
  std::optional<double> mean_before;
  std::optional<double> mean_after;
  std::optional<double> word_mean;
};

// Sentence row, one row per entity type, and the Out row.
std::vector<StatsRow> full_stats(const Corpus& corpus, const PieceSource& source,
                                 Casing casing,
                                 Weighting weighting = Weighting::kUnique);

// tokenizer,population,mean_before,mean_after,pct_increase,word_mean with
// 2 decimals for means and 1 for percentages; absent cells are empty.
std::string stats_csv(const std::vector<StatsRow>& rows);

}  // namespace seglens
