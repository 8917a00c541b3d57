#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seglens/corpus.hpp"
#include "seglens/wordpiece.hpp"

namespace seglens {

// Half-open range of subword positions.
struct PieceRange {
  size_t first = 0;
  size_t last = 0;

  size_t size() const { return last - first; }
  bool operator==(const PieceRange&) const = default;
};

struct TokenAlignment {
  std::vector<PieceRange> words;
  size_t leading_specials = 0;
  size_t trailing_specials = 0;

  size_t word_count() const { return words.size(); }
  // Specials included.
  size_t total_positions() const;
};

struct Specials {
  size_t leading = 0;
  size_t trailing = 0;
};

TokenAlignment build_alignment(
    const std::vector<std::vector<std::string>>& pieces, Specials specials);

// Alignments for every sentence of a corpus under a piece source.
std::unordered_map<std::string, TokenAlignment> build_alignments(
    const Corpus& corpus, const PieceSource& source, Specials specials);

// Row-major P x D block of 32-bit floats.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  std::span<float> row(size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(size_t i) const {
    return {data.data() + i * cols, cols};
  }
  float& operator()(size_t i, size_t j) { return data[i * cols + j]; }
  float operator()(size_t i, size_t j) const { return data[i * cols + j]; }
  bool operator==(const Matrix&) const = default;
};

enum class EmbeddingLevel { kSubword, kWord };

std::string_view to_string(EmbeddingLevel level);

class EmbeddingTable {
 public:
  explicit EmbeddingTable(EmbeddingLevel level = EmbeddingLevel::kWord)
      : level_(level) {}

  EmbeddingLevel level() const { return level_; }
  // 0 until the first matrix is added.
  size_t dim() const { return dim_; }
  size_t size() const { return rows_.size(); }

  // Throws when the dimension differs from earlier entries or the id repeats.
  void add(std::string id, Matrix m);

  bool contains(std::string_view id) const;
  const Matrix& at(std::string_view id) const;
  const std::vector<std::string>& ids() const { return order_; }

 private:
  EmbeddingLevel level_;
  size_t dim_ = 0;
  std::vector<std::string> order_;
  std::unordered_map<std::string, Matrix> rows_;
};

enum class Aggregation { kNone, kSum, kAverage };

std::string_view to_string(Aggregation a);
std::optional<Aggregation> parse_aggregation(std::string_view s);

// One row per word: the elementwise sum (or mean) of the word's subword rows.
// Special rows are dropped. Accumulates in double.
Matrix aggregate_embeddings(const Matrix& subwords,
                            const TokenAlignment& alignment, Aggregation mode);

EmbeddingTable aggregate_embeddings(
    const EmbeddingTable& table,
    const std::unordered_map<std::string, TokenAlignment>& alignments,
    Aggregation mode);

// Start is the first subword of the span's first word, end is the first
// subword of its last word (both inclusive positions).
std::pair<size_t, size_t> map_span_to_subwords(const EntityMention& span,
                                               const TokenAlignment& alignment);

// JSON-lines: {"id", "level", "vectors"} per sentence. Every record must share
// one level and dimension.
EmbeddingTable parse_embeddings_jsonl(std::string_view text);
EmbeddingTable load_embeddings(const std::filesystem::path& path);
std::string serialize_embeddings_jsonl(const EmbeddingTable& table);

// Single-matrix binary file: "SLEM", u32 version, u32 P, u32 D, then P*D
// little-endian floats.
inline constexpr char kEmbeddingMagic[4] = {'S', 'L', 'E', 'M'};
inline constexpr uint32_t kEmbeddingBinaryVersion = 1;

std::string encode_matrix_binary(const Matrix& m);
Matrix decode_matrix_binary(std::string_view bytes);

}  // namespace seglens
