#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "seglens/corpus.hpp"

namespace seglens {

// Contiguous n-code-point substrings, in order, repeats kept.
std::vector<std::string> char_ngrams(std::string_view word, size_t n);

struct MorphOptions {
  size_t n = 4;
  // Fold words to lowercase (and dedupe again) before extraction.
  bool lowercase = true;
  // Count a repeated n-gram inside one word once per occurrence (true) or
  // once per word (false).
  bool keep_repeats = true;
};

struct NgramTable {
  size_t n = 4;
  std::map<EntityLabel, std::map<std::string, size_t>> counts;
};

// Counts over the unique words of each entity type.
NgramTable ngram_frequency_table(const WordIndex& index,
                                 const MorphOptions& options);

// Counts over an arbitrary unique word set.
std::map<std::string, size_t> ngram_counts(
    const std::vector<std::string>& words, const MorphOptions& options);

// Highest count first, ties broken lexicographically.
std::vector<std::pair<std::string, size_t>> rank_ngrams(
    const std::map<std::string, size_t>& counts);

// The `top` most frequent n-grams of the Out words.
std::set<std::string> build_exclusion_list(
    const std::vector<std::string>& out_words, size_t top,
    const MorphOptions& options);

struct RankedNgram {
  std::string ngram;
  size_t count = 0;
  size_t rank = 0;  // 1-based
};

struct TopKReport {
  EntityLabel label = EntityLabel::kDrug;
  std::vector<RankedNgram> top;
  std::vector<size_t> thresholds;
  // For each threshold t, how many kept n-grams have count >= t.
  std::vector<size_t> threshold_counts;
};

TopKReport top_k_and_thresholds(const NgramTable& table, EntityLabel label,
                                const std::set<std::string>& exclusion,
                                size_t k, const std::vector<size_t>& thresholds);

struct MorphAnalysis {
  NgramTable table;
  std::set<std::string> exclusion;
  std::vector<TopKReport> reports;  // one per entity type
};

struct MorphRunOptions {
  MorphOptions ngram;
  Casing casing = Casing::kCased;
  size_t exclusion_top = 50;
  size_t k = 25;
  std::vector<size_t> thresholds = {40, 30, 20, 10};
};

MorphAnalysis run_morph(const Corpus& corpus, const MorphRunOptions& options);

// type,ngram,count,rank
std::string morph_csv(const std::vector<TopKReport>& reports);
// type,threshold,count
std::string threshold_csv(const std::vector<TopKReport>& reports);
// Horizontal bar chart, bars in rank order with count labels.
std::string morph_svg(const TopKReport& report);

}  // namespace seglens
