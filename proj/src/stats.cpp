#include "seglens/stats.hpp"

#include <sstream>

#include "io.hpp"
#include "seglens/error.hpp"
#include "seglens/text.hpp"

namespace seglens {

namespace {

double mean(double sum, size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

size_t piece_count(const PieceSource& source, const Corpus& corpus, std::string_view word,
                   size_t sentence, size_t index) {
  return source.pieces_for_surface(word, corpus, sentence, index).size();
}

double word_mean(const Corpus& corpus, const PieceSource& source, WordClass cls, Casing casing,
                 Weighting weighting) {
  const auto index = entity_word_index(corpus, casing);
  const auto& words = index.of(cls);
  if (weighting == Weighting::kUnique) {
    double sum = 0.0;
    for (const auto& [word, occ] : words) {
      sum += static_cast<double>(piece_count(source, corpus, word, occ.sentence, occ.word));
    }
    return mean(sum, words.size());
  }
  // Every occurrence of a word that belongs to the class.
  double sum = 0.0;
  size_t n = 0;
  for (size_t si = 0; si < corpus.size(); ++si) {
    const auto& s = corpus[si];
    for (size_t w = 0; w < s.words.size(); ++w) {
      std::string key = casing == Casing::kUncased ? text::to_lower(s.words[w]) : s.words[w];
      if (!words.contains(key)) continue;
      sum += static_cast<double>(source.pieces(corpus, si, w).size());
      ++n;
    }
  }
  return mean(sum, n);
}

}  // namespace

double LengthReport::pct_increase() const {
  if (mean_before == 0.0) return 0.0;
  return (mean_after - mean_before) / mean_before * 100.0;
}

LengthReport sentence_stats(const Corpus& corpus, const PieceSource& source) {
  double words = 0.0;
  double pieces = 0.0;
  for (size_t si = 0; si < corpus.size(); ++si) {
    const auto& s = corpus[si];
    words += static_cast<double>(s.words.size());
    for (size_t w = 0; w < s.words.size(); ++w) {
      pieces += static_cast<double>(source.pieces(corpus, si, w).size());
    }
  }
  return {"Sentence", mean(words, corpus.size()), mean(pieces, corpus.size())};
}

EntityStats entity_stats(const Corpus& corpus, const PieceSource& source, EntityLabel label,
                         Casing casing, Weighting weighting) {
  EntityStats out;
  out.entity.population = std::string(to_string(label));
  double words = 0.0;
  double pieces = 0.0;
  size_t n = 0;
  auto add_span = [&](size_t si, size_t start, size_t end) {
    const auto& s = corpus[si];
    words += static_cast<double>(end - start);
    for (size_t w = start; w < end; ++w) {
      const std::string surface =
          casing == Casing::kUncased ? text::to_lower(s.words[w]) : s.words[w];
      pieces += static_cast<double>(piece_count(source, corpus, surface, si, w));
    }
    ++n;
  };
  if (weighting == Weighting::kUnique) {
    for (const auto& e : unique_entity_surfaces(corpus, label, casing)) {
      add_span(e.sentence, e.start, e.start + e.word_length);
    }
  } else {
    for (size_t si = 0; si < corpus.size(); ++si) {
      for (const auto& e : corpus[si].entities) {
        if (e.label == label) add_span(si, e.start, e.end);
      }
    }
  }
  out.entity.mean_before = mean(words, n);
  out.entity.mean_after = mean(pieces, n);
  out.word_mean = word_mean(corpus, source, word_class(label), casing, weighting);
  return out;
}

double out_word_stats(const Corpus& corpus, const PieceSource& source, Casing casing,
                      Weighting weighting) {
  return word_mean(corpus, source, WordClass::kOut, casing, weighting);
}

std::vector<StatsRow> full_stats(const Corpus& corpus, const PieceSource& source, Casing casing,
                                 Weighting weighting) {
  std::vector<StatsRow> rows;
  auto sentence = sentence_stats(corpus, source);
  rows.push_back({source.name(), sentence.population, sentence.mean_before, sentence.mean_after,
                  std::nullopt});
  for (EntityLabel label : kEntityLabels) {
    auto e = entity_stats(corpus, source, label, casing, weighting);
    rows.push_back({source.name(), e.entity.population, e.entity.mean_before,
                    e.entity.mean_after, e.word_mean});
  }
  rows.push_back({source.name(), "Out", std::nullopt, std::nullopt,
                  out_word_stats(corpus, source, casing, weighting)});
  return rows;
}

std::string stats_csv(const std::vector<StatsRow>& rows) {
  std::ostringstream out;
  out << "tokenizer,population,mean_before,mean_after,pct_increase,word_mean\n";
  for (const auto& r : rows) {
    out << r.tokenizer << ',' << r.population << ',';
    if (r.mean_before) out << detail::format_fixed(*r.mean_before, 2);
    out << ',';
    if (r.mean_after) out << detail::format_fixed(*r.mean_after, 2);
    out << ',';
    if (r.mean_before && r.mean_after) {
      LengthReport l{r.population, *r.mean_before, *r.mean_after};
      out << detail::format_fixed(l.pct_increase(), 1);
    }
    out << ',';
    if (r.word_mean) out << detail::format_fixed(*r.word_mean, 2);
    out << '\n';
  }
  return out.str();
}

}  // namespace seglens
