#include "seglens/morph.hpp"

#include <algorithm>
#include <sstream>

#include "seglens/error.hpp"
#include "seglens/text.hpp"

namespace seglens {

std::vector<std::string> char_ngrams(std::string_view word, size_t n) {
  if (n == 0) throw Error(ErrorKind::kArgument, "morph", "n-gram length must be positive");
  auto offsets = text::codepoint_offsets(word);
  size_t chars = offsets.size() - 1;
  std::vector<std::string> out;
  if (chars < n) return out;
  out.reserve(chars - n + 1);
  for (size_t i = 0; i + n <= chars; ++i) {
    out.emplace_back(word.substr(offsets[i], offsets[i + n] - offsets[i]));
  }
  return out;
}

namespace {

std::vector<std::string> prepare_words(const std::vector<std::string>& words,
                                       const MorphOptions& options) {
  std::set<std::string> unique;
  for (const auto& w : words) unique.insert(options.lowercase ? text::to_lower(w) : w);
  return {unique.begin(), unique.end()};
}

std::vector<std::string> keys_of(const std::map<std::string, WordOccurrence>& m) {
  std::vector<std::string> out;
  out.reserve(m.size());
  for (const auto& [w, occ] : m) out.push_back(w);
  return out;
}

}  // namespace

std::map<std::string, size_t> ngram_counts(const std::vector<std::string>& words,
                                           const MorphOptions& options) {
  std::map<std::string, size_t> counts;
  for (const auto& w : prepare_words(words, options)) {
    auto grams = char_ngrams(w, options.n);
    if (!options.keep_repeats) {
      std::sort(grams.begin(), grams.end());
      grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    }
    for (auto& g : grams) ++counts[std::move(g)];
  }
  return counts;
}

NgramTable ngram_frequency_table(const WordIndex& index, const MorphOptions& options) {
  NgramTable table;
  table.n = options.n;
  for (EntityLabel label : kEntityLabels) {
    table.counts[label] = ngram_counts(keys_of(index.of(word_class(label))), options);
  }
  return table;
}

std::vector<std::pair<std::string, size_t>> rank_ngrams(const std::map<std::string, size_t>& counts) {
  std::vector<std::pair<std::string, size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is already lexicographic; a stable sort by count keeps it for ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return ranked;
}

std::set<std::string> build_exclusion_list(const std::vector<std::string>& out_words, size_t top,
                                           const MorphOptions& options) {
  std::set<std::string> out;
  if (top == 0) return out;
  auto ranked = rank_ngrams(ngram_counts(out_words, options));
  for (size_t i = 0; i < ranked.size() && i < top; ++i) out.insert(ranked[i].first);
  return out;
}

TopKReport top_k_and_thresholds(const NgramTable& table, EntityLabel label,
                                const std::set<std::string>& exclusion, size_t k,
                                const std::vector<size_t>& thresholds) {
  if (k == 0) throw Error(ErrorKind::kArgument, "morph", "k must be at least 1");
  TopKReport report;
  report.label = label;
  report.thresholds = thresholds;
  auto it = table.counts.find(label);
  if (it != table.counts.end()) {
    for (const auto& [gram, count] : rank_ngrams(it->second)) {
      if (exclusion.contains(gram)) continue;
      report.top.push_back({gram, count, report.top.size() + 1});
      if (report.top.size() == k) break;
    }
  }
  for (size_t t : thresholds) {
    report.threshold_counts.push_back(static_cast<size_t>(std::count_if(
        report.top.begin(), report.top.end(), [t](const RankedNgram& r) { return r.count >= t; })));
  }
  return report;
}

MorphAnalysis run_morph(const Corpus& corpus, const MorphRunOptions& options) {
  MorphAnalysis out;
  auto index = entity_word_index(corpus, options.casing);
  out.table = ngram_frequency_table(index, options.ngram);
  out.exclusion = build_exclusion_list(keys_of(index.of(WordClass::kOut)), options.exclusion_top,
                                       options.ngram);
  for (EntityLabel label : kEntityLabels) {
    out.reports.push_back(
        top_k_and_thresholds(out.table, label, out.exclusion, options.k, options.thresholds));
  }
  return out;
}

std::string morph_csv(const std::vector<TopKReport>& reports) {
  std::ostringstream out;
  out << "type,ngram,count,rank\n";
  for (const auto& r : reports) {
    for (const auto& g : r.top) {
      out << to_string(r.label) << ',' << g.ngram << ',' << g.count << ',' << g.rank << '\n';
    }
  }
  return out.str();
}

std::string threshold_csv(const std::vector<TopKReport>& reports) {
  std::ostringstream out;
  out << "type,threshold,count\n";
  for (const auto& r : reports) {
    for (size_t i = 0; i < r.thresholds.size(); ++i) {
      out << to_string(r.label) << ',' << r.thresholds[i] << ',' << r.threshold_counts[i] << '\n';
    }
  }
  return out.str();
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string morph_svg(const TopKReport& report) {
  constexpr int kLabelWidth = 70;
  constexpr int kBarArea = 400;
  constexpr int kRowHeight = 18;
  constexpr int kTop = 30;
  const int height = kTop + static_cast<int>(report.top.size()) * kRowHeight + 10;
  const int width = kLabelWidth + kBarArea + 60;
  size_t max_count = 1;
  for (const auto& g : report.top) max_count = std::max(max_count, g.count);

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "  <text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(to_string(report.label)) << ": " << report.top.size()
      << " most frequent subwords</text>\n";
  for (size_t i = 0; i < report.top.size(); ++i) {
    const auto& g = report.top[i];
    int y = kTop + static_cast<int>(i) * kRowHeight;
    int len = static_cast<int>(static_cast<double>(g.count) / static_cast<double>(max_count) * kBarArea);
    out << "  <text x=\"" << kLabelWidth - 6 << "\" y=\"" << y + 13
        << "\" text-anchor=\"end\">" << xml_escape(g.ngram) << "</text>\n";
    out << "  <rect x=\"" << kLabelWidth << "\" y=\"" << y + 2 << "\" width=\"" << len
        << "\" height=\"" << kRowHeight - 4 << "\" fill=\"#4c72b0\"/>\n";
    out << "  <text x=\"" << kLabelWidth + len + 4 << "\" y=\"" << y + 13 << "\">" << g.count
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace seglens
