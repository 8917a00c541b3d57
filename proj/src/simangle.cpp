#include "seglens/simangle.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "io.hpp"
#include "seglens/error.hpp"

namespace seglens {

namespace {

const char* kModule = "simangle";

constexpr GroupPosition kPositions[] = {GroupPosition::kStart, GroupPosition::kEnd,
                                        GroupPosition::kJoint};

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

}  // namespace

std::string_view to_string(GroupPosition p) {
  switch (p) {
    case GroupPosition::kStart: return "Start";
    case GroupPosition::kEnd: return "End";
    case GroupPosition::kJoint: return "Joint";
  }
  return "?";
}

size_t group_slot(EntityLabel label, GroupPosition position) {
  return (label == EntityLabel::kDrug ? 0 : 3) + static_cast<size_t>(position);
}

std::vector<EntityGroup> build_groups(const Corpus& corpus,
                                      const std::vector<std::string>& test_ids) {
  std::vector<EntityGroup> groups(kGroupCount);
  for (EntityLabel label : kEntityLabels) {
    for (GroupPosition p : kPositions) {
      auto& g = groups[group_slot(label, p)];
      g.label = label;
      g.position = p;
    }
  }
  for (const auto& id : test_ids) {
    const auto& s = corpus.at(id);
    for (const auto& e : s.entities) {
      VectorRef first{s.id, e.start};
      VectorRef last{s.id, e.end - 1};
      groups[group_slot(e.label, GroupPosition::kStart)].members.push_back(first);
      groups[group_slot(e.label, GroupPosition::kEnd)].members.push_back(last);
      auto& joint = groups[group_slot(e.label, GroupPosition::kJoint)].members;
      joint.push_back(first);
      if (e.length() > 1) joint.push_back(last);
    }
  }
  return groups;
}

std::optional<double> mean_pairwise_cosine(const std::vector<std::span<const float>>& vectors) {
  if (vectors.size() < 2) return std::nullopt;
  std::vector<double> norms;
  norms.reserve(vectors.size());
  for (const auto& v : vectors) norms.push_back(norm(v));
  CompensatedSum sum;
  size_t pairs = 0;
  for (size_t i = 0; i < vectors.size(); ++i) {
    for (size_t j = i + 1; j < vectors.size(); ++j) {
      sum.add(dot(vectors[i], vectors[j]) / (norms[i] * norms[j]));
      ++pairs;
    }
  }
  return 100.0 * sum.value() / static_cast<double>(pairs);
}

GroupScore group_similarity(const EntityGroup& group, const EmbeddingTable& table,
                            SimilarityMode mode) {
  if (table.level() != EmbeddingLevel::kWord) {
    throw Error(ErrorKind::kArgument, kModule, "similarity needs a word-level table");
  }
  GroupScore out;
  out.members = group.members.size();
  std::vector<std::span<const float>> vectors;
  vectors.reserve(group.members.size());
  for (const auto& m : group.members) {
    const auto& matrix = table.at(m.sentence_id);
    if (m.word >= matrix.rows) {
      throw Error(ErrorKind::kValidation, kModule,
                  "sentence " + m.sentence_id + ": word " + std::to_string(m.word) +
                      " beyond " + std::to_string(matrix.rows) + " rows");
    }
    auto row = matrix.row(m.word);
    if (norm(row) == 0.0) {
      ++out.zero_vectors;
      continue;
    }
    vectors.push_back(row);
  }
  if (mode == SimilarityMode::kPairwise) {
    out.score = mean_pairwise_cosine(vectors);
    return out;
  }
  if (vectors.size() < 2) return out;
  std::vector<double> centroid(table.dim(), 0.0);
  for (const auto& v : vectors) {
    for (size_t d = 0; d < v.size(); ++d) centroid[d] += v[d];
  }
  double cnorm = 0.0;
  for (double c : centroid) cnorm += c * c;
  cnorm = std::sqrt(cnorm);
  if (cnorm == 0.0) return out;
  CompensatedSum sum;
  for (const auto& v : vectors) {
    double d = 0.0;
    for (size_t i = 0; i < v.size(); ++i) d += v[i] * centroid[i];
    sum.add(d / (norm(v) * cnorm));
  }
  out.score = 100.0 * sum.value() / static_cast<double>(vectors.size());
  return out;
}

SimilarityReport::Scores fold_scores(const Corpus& corpus, const std::vector<std::string>& test_ids,
                                     const EmbeddingTable& table, SimilarityMode mode,
                                     size_t* zero_vectors) {
  SimilarityReport::Scores scores{};
  auto groups = build_groups(corpus, test_ids);
  for (size_t i = 0; i < groups.size(); ++i) {
    auto g = group_similarity(groups[i], table, mode);
    scores[i] = g.score;
    if (zero_vectors) *zero_vectors += g.zero_vectors;
  }
  return scores;
}

SimilarityReport fold_average_report(const std::vector<SimilarityReport::Scores>& folds) {
  if (folds.empty()) throw Error(ErrorKind::kArgument, kModule, "no folds to average");
  SimilarityReport report;
  report.folds = folds;
  for (size_t g = 0; g < kGroupCount; ++g) {
    double sum = 0.0;
    size_t n = 0;
    for (const auto& f : folds) {
      if (f[g]) {
        sum += *f[g];
        ++n;
      }
    }
    if (n > 0) report.aggregate[g] = sum / static_cast<double>(n);
  }
  return report;
}

std::string similarity_csv(const SimilarityReport& report) {
  std::ostringstream out;
  out << "label,position,fold,score\n";
  for (EntityLabel label : kEntityLabels) {
    for (GroupPosition p : kPositions) {
      size_t g = group_slot(label, p);
      auto cell = [](const std::optional<double>& v) {
        return v ? detail::format_fixed(*v, 2) : std::string();
      };
      for (size_t f = 0; f < report.folds.size(); ++f) {
        out << to_string(label) << ',' << to_string(p) << ',' << f << ','
            << cell(report.folds[f][g]) << '\n';
      }
      out << to_string(label) << ',' << to_string(p) << ",mean," << cell(report.aggregate[g])
          << '\n';
    }
  }
  return out.str();
}

}  // namespace seglens
