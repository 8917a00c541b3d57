#pragma once

#include <string>
#include <vector>

#include "seglens/corpus.hpp"

namespace testing_helpers {

inline std::string data_path(const std::string& name) { return std::string(SEGLENS_TEST_DATA) + "/" + name; }

inline seglens::Sentence sentence(std::string id, std::vector<std::string> words,
                                  std::vector<seglens::EntityMention> entities = {},
                                  std::vector<seglens::RelationMention> relations = {}) {
  return {std::move(id), std::move(words), std::move(entities), std::move(relations)};
}

inline seglens::EntityMention drug(size_t s, size_t e) { return {seglens::EntityLabel::kDrug, s, e}; }
inline seglens::EntityMention ae(size_t s, size_t e) { return {seglens::EntityLabel::kAdverseEffect, s, e}; }
inline seglens::RelationMention rel(size_t h, size_t t) { return {seglens::RelationLabel::kAdverseEffectOf, h, t}; }

}  // namespace testing_helpers
