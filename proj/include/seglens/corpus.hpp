#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seglens {

enum class EntityLabel { kDrug, kAdverseEffect };
enum class RelationLabel { kAdverseEffectOf };
enum class Casing { kCased, kUncased };

inline constexpr EntityLabel kEntityLabels[] = {EntityLabel::kDrug,
                                                EntityLabel::kAdverseEffect};

std::string_view to_string(EntityLabel label);
std::string_view to_string(RelationLabel label);
std::string_view to_string(Casing casing);

// Accepts the canonical names plus the spellings used by common ADE
// distributions ("Adverse-Effect", "AdverseEffect", "AE").
std::optional<EntityLabel> parse_entity_label(std::string_view s);
std::optional<RelationLabel> parse_relation_label(std::string_view s);
std::optional<Casing> parse_casing(std::string_view s);

// Word span [start, end) with a type.
struct EntityMention {
  EntityLabel label = EntityLabel::kDrug;
  size_t start = 0;
  size_t end = 0;

  size_t length() const { return end - start; }
  auto operator<=>(const EntityMention&) const = default;
};

// head and tail index into the owning sentence's entity list.
struct RelationMention {
  RelationLabel label = RelationLabel::kAdverseEffectOf;
  size_t head = 0;
  size_t tail = 0;

  auto operator<=>(const RelationMention&) const = default;
};

struct Sentence {
  std::string id;
  std::vector<std::string> words;
  std::vector<EntityMention> entities;
  std::vector<RelationMention> relations;
};

struct LoadSummary {
  // Number of entity pairs within one sentence whose spans intersect.
  size_t overlapping_spans = 0;
};

class Corpus {
 public:
  Corpus() = default;

  // Validates every sentence and builds the id index. Throws on the first
  // violation, naming the offending sentence id.
  explicit Corpus(std::vector<Sentence> sentences);

  const std::vector<Sentence>& sentences() const { return sentences_; }
  size_t size() const { return sentences_.size(); }
  bool empty() const { return sentences_.empty(); }
  const Sentence& operator[](size_t i) const { return sentences_[i]; }

  std::optional<size_t> find(std::string_view id) const;
  const Sentence& at(std::string_view id) const;

  // Sentences with the given ids, in the order the ids are listed.
  Corpus subset(const std::vector<std::string>& ids) const;

  const LoadSummary& summary() const { return summary_; }

 private:
  std::vector<Sentence> sentences_;
  std::unordered_map<std::string, size_t> index_;
  LoadSummary summary_;
};

// Checks the sentence-level invariants; throws seglens::Error naming the id.
void validate_sentence(const Sentence& s);

// ADE-style JSON: array of {"tokens", "entities", "relations"} objects with an
// optional "id" (string or integer). Sentences without an id get their
// zero-based position as id.
Corpus parse_corpus_json(std::string_view json_text);
Corpus load_corpus(const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);

struct Fold {
  std::vector<std::string> train_ids;
  std::vector<std::string> dev_ids;
  std::vector<std::string> test_ids;
};

struct FoldPlan {
  size_t k = 10;
  double dev_fraction = 0.15;
  uint64_t seed = 42;
  bool external = false;
  std::vector<Fold> folds;
};

struct FoldOptions {
  size_t k = 10;
  double dev_fraction = 0.15;
  uint64_t seed = 42;
};

// Seeded k-fold split. Test partitions are contiguous chunks of a shuffled id
// list; the dev set is carved from each fold's training portion with
// |dev| = round(dev_fraction * |train + dev|).
FoldPlan make_folds(const Corpus& corpus, const FoldOptions& options);

// External test partitions given as sentence positions (one list per fold).
// Only dev is carved from the remaining training portion.
FoldPlan make_folds(const Corpus& corpus, const FoldOptions& options,
                    const std::vector<std::vector<size_t>>& external_tests);

std::vector<size_t> load_fold_file(const std::filesystem::path& path);
std::string serialize_fold_plan(const FoldPlan& plan);

struct EntitySurface {
  std::string surface;
  size_t word_length = 0;
  // First occurrence, used when pieces come from a sentence-level source.
  size_t sentence = 0;
  size_t start = 0;

  bool operator==(const EntitySurface& o) const {
    return surface == o.surface && word_length == o.word_length;
  }
};

// Unique entity surfaces of one type, in order of first occurrence. Words
// are joined with single spaces and lowercased first when uncased.
std::vector<EntitySurface> unique_entity_surfaces(const Corpus& corpus,
                                                  EntityLabel label,
                                                  Casing casing);

enum class WordClass { kDrug, kAdverseEffect, kOut };

std::string_view to_string(WordClass c);
WordClass word_class(EntityLabel label);

struct WordOccurrence {
  size_t sentence = 0;
  size_t word = 0;
};

// Unique words per entity type plus the Out class (never inside any span).
// Each word keeps its first occurrence.
struct WordIndex {
  std::map<WordClass, std::map<std::string, WordOccurrence>> words;

  const std::map<std::string, WordOccurrence>& of(WordClass c) const;
};

WordIndex entity_word_index(const Corpus& corpus, Casing casing);

}  // namespace seglens
