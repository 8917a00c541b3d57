#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seglens/align.hpp"
#include "seglens/corpus.hpp"

namespace seglens {

enum class GroupPosition { kStart, kEnd, kJoint };

std::string_view to_string(GroupPosition p);

struct VectorRef {
  std::string sentence_id;
  size_t word = 0;

  bool operator==(const VectorRef&) const = default;
};

struct EntityGroup {
  EntityLabel label = EntityLabel::kDrug;
  GroupPosition position = GroupPosition::kStart;
  std::vector<VectorRef> members;
};

inline constexpr size_t kGroupCount = 6;

// Six groups in fixed order: (Drug, Start), (Drug, End), (Drug, Joint),
// (AdverseEffect, Start), ... Occurrence level: every entity in every listed
// sentence contributes. A single-word entity contributes one Joint member.
std::vector<EntityGroup> build_groups(const Corpus& corpus,
                                      const std::vector<std::string>& test_ids);

size_t group_slot(EntityLabel label, GroupPosition position);

enum class SimilarityMode {
  kPairwise,  // mean cosine over unordered member pairs
  kCentroid,  // mean cosine of each member to the group centroid
};

struct GroupScore {
  // Mean cosine x 100; absent for groups with fewer than two usable members.
  std::optional<double> score;
  size_t members = 0;
  size_t zero_vectors = 0;
};

GroupScore group_similarity(const EntityGroup& group,
                            const EmbeddingTable& table,
                            SimilarityMode mode = SimilarityMode::kPairwise);

// Pairwise mean over plain vectors; exposed for tests and callers that
// already hold the member rows.
std::optional<double> mean_pairwise_cosine(
    const std::vector<std::span<const float>>& vectors);

struct SimilarityReport {
  using Scores = std::array<std::optional<double>, kGroupCount>;

  std::vector<Scores> folds;
  Scores aggregate{};
  size_t zero_vectors = 0;
};

SimilarityReport::Scores fold_scores(const Corpus& corpus,
                                     const std::vector<std::string>& test_ids,
                                     const EmbeddingTable& table,
                                     SimilarityMode mode, size_t* zero_vectors);

// Unweighted mean of the fold scores per group; folds where a group is
// absent are skipped for that group.
SimilarityReport fold_average_report(
    const std::vector<SimilarityReport::Scores>& folds);

// label,position,fold,score with one aggregate row (fold = "mean") per group.
std::string similarity_csv(const SimilarityReport& report);

}  // namespace seglens
