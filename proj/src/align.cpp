#include "seglens/align.hpp"

#include <cmath>
#include <cstring>

#include "io.hpp"
#include "json.hpp"
#include "seglens/error.hpp"

namespace seglens {

using nlohmann::json;

namespace {

const char* kModule = "align";

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, kModule, msg);
}

}  // namespace

size_t TokenAlignment::total_positions() const {
  size_t body = words.empty() ? 0 : words.back().last - leading_specials;
  return leading_specials + body + trailing_specials;
}

TokenAlignment build_alignment(const std::vector<std::vector<std::string>>& pieces,
                               Specials specials) {
  TokenAlignment a;
  a.leading_specials = specials.leading;
  a.trailing_specials = specials.trailing;
  a.words.reserve(pieces.size());
  size_t pos = specials.leading;
  for (size_t w = 0; w < pieces.size(); ++w) {
    if (pieces[w].empty()) fail(ErrorKind::kArgument, "word " + std::to_string(w) + " has no pieces");
    a.words.push_back({pos, pos + pieces[w].size()});
    pos += pieces[w].size();
  }
  return a;
}

std::unordered_map<std::string, TokenAlignment> build_alignments(const Corpus& corpus,
                                                                 const PieceSource& source,
                                                                 Specials specials) {
  std::unordered_map<std::string, TokenAlignment> out;
  out.reserve(corpus.size());
  for (size_t si = 0; si < corpus.size(); ++si) {
    const auto& s = corpus[si];
    std::vector<std::vector<std::string>> pieces;
    pieces.reserve(s.words.size());
    for (size_t w = 0; w < s.words.size(); ++w) pieces.push_back(source.pieces(corpus, si, w));
    out.emplace(s.id, build_alignment(pieces, specials));
  }
  return out;
}

std::string_view to_string(EmbeddingLevel level) {
  return level == EmbeddingLevel::kSubword ? "subword" : "word";
}

void EmbeddingTable::add(std::string id, Matrix m) {
  if (rows_.empty()) {
    dim_ = m.cols;
  } else if (m.cols != dim_) {
    fail(ErrorKind::kValidation, "sentence " + id + ": dimension " + std::to_string(m.cols) +
                                     " differs from " + std::to_string(dim_));
  }
  if (rows_.contains(id)) fail(ErrorKind::kValidation, "sentence " + id + " listed twice");
  order_.push_back(id);
  rows_.emplace(std::move(id), std::move(m));
}

bool EmbeddingTable::contains(std::string_view id) const {
  return rows_.contains(std::string(id));
}

const Matrix& EmbeddingTable::at(std::string_view id) const {
  auto it = rows_.find(std::string(id));
  if (it == rows_.end()) fail(ErrorKind::kValidation, "sentence " + std::string(id) + " absent from embeddings");
  return it->second;
}

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::kNone: return "none";
    case Aggregation::kSum: return "sum";
    case Aggregation::kAverage: return "average";
  }
  return "?";
}

std::optional<Aggregation> parse_aggregation(std::string_view s) {
  if (s == "none") return Aggregation::kNone;
  if (s == "sum") return Aggregation::kSum;
  if (s == "average" || s == "avg" || s == "mean") return Aggregation::kAverage;
  return std::nullopt;
}

Matrix aggregate_embeddings(const Matrix& subwords, const TokenAlignment& alignment,
                            Aggregation mode) {
  if (mode == Aggregation::kNone) fail(ErrorKind::kArgument, "aggregation mode none does not produce words");
  if (subwords.rows != alignment.total_positions()) {
    fail(ErrorKind::kValidation, "table has " + std::to_string(subwords.rows) +
                                     " rows but the alignment spans " +
                                     std::to_string(alignment.total_positions()) + " positions");
  }
  Matrix out(alignment.word_count(), subwords.cols);
  std::vector<double> acc(subwords.cols);
  for (size_t w = 0; w < alignment.word_count(); ++w) {
    const auto& r = alignment.words[w];
    std::fill(acc.begin(), acc.end(), 0.0);
    for (size_t p = r.first; p < r.last; ++p) {
      auto row = subwords.row(p);
      for (size_t d = 0; d < acc.size(); ++d) acc[d] += row[d];
    }
    double scale = mode == Aggregation::kAverage ? 1.0 / static_cast<double>(r.size()) : 1.0;
    auto dst = out.row(w);
    for (size_t d = 0; d < acc.size(); ++d) dst[d] = static_cast<float>(acc[d] * scale);
  }
  return out;
}

EmbeddingTable aggregate_embeddings(const EmbeddingTable& table,
                                    const std::unordered_map<std::string, TokenAlignment>& alignments,
                                    Aggregation mode) {
  if (table.level() != EmbeddingLevel::kSubword) fail(ErrorKind::kArgument, "table is not at subword level");
  EmbeddingTable out(EmbeddingLevel::kWord);
  for (const auto& id : table.ids()) {
    auto it = alignments.find(id);
    if (it == alignments.end()) fail(ErrorKind::kValidation, "no alignment for sentence " + id);
    try {
      out.add(id, aggregate_embeddings(table.at(id), it->second, mode));
    } catch (const Error& e) {
      fail(e.kind(), "sentence " + id + ": " + e.what());
    }
  }
  return out;
}

std::pair<size_t, size_t> map_span_to_subwords(const EntityMention& span,
                                               const TokenAlignment& alignment) {
  if (span.start >= span.end || span.end > alignment.word_count()) {
    fail(ErrorKind::kArgument, "span [" + std::to_string(span.start) + ", " +
                                   std::to_string(span.end) + ") outside " +
                                   std::to_string(alignment.word_count()) + " words");
  }
  return {alignment.words[span.start].first, alignment.words[span.end - 1].first};
}

EmbeddingTable parse_embeddings_jsonl(std::string_view text) {
  std::optional<EmbeddingTable> table;
  size_t line_no = 0;
  size_t start = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    size_t stop = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(start, stop - start);
    start = stop + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("vectors")) {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": record lacks \"id\" or \"vectors\"");
    }
    std::string id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    EmbeddingLevel level = EmbeddingLevel::kWord;
    std::string level_name = rec.value("level", std::string("word"));
    if (level_name == "subword") {
      level = EmbeddingLevel::kSubword;
    } else if (level_name != "word") {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": unknown level " + level_name);
    }
    if (!table) table.emplace(level);
    if (table->level() != level) fail(ErrorKind::kValidation, "sentence " + id + ": mixed levels in one table");
    const auto& vecs = rec["vectors"];
    if (!vecs.is_array()) fail(ErrorKind::kParse, "sentence " + id + ": \"vectors\" is not an array");
    Matrix m;
    m.rows = vecs.size();
    for (size_t r = 0; r < vecs.size(); ++r) {
      const auto& row = vecs[r];
      if (!row.is_array()) fail(ErrorKind::kParse, "sentence " + id + ": row " + std::to_string(r) + " is not an array");
      if (r == 0) {
        m.cols = row.size();
        m.data.reserve(m.rows * m.cols);
      } else if (row.size() != m.cols) {
        fail(ErrorKind::kValidation, "sentence " + id + ": ragged rows");
      }
      for (const auto& v : row) {
        if (!v.is_number()) fail(ErrorKind::kParse, "sentence " + id + ": non-numeric value");
        m.data.push_back(v.get<float>());
      }
    }
    table->add(id, std::move(m));
  }
  return table ? std::move(*table) : EmbeddingTable(EmbeddingLevel::kWord);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  return parse_embeddings_jsonl(detail::read_file(path, kModule));
}

std::string serialize_embeddings_jsonl(const EmbeddingTable& table) {
  std::string out;
  for (const auto& id : table.ids()) {
    const auto& m = table.at(id);
    json vectors = json::array();
    for (size_t r = 0; r < m.rows; ++r) {
      auto row = m.row(r);
      vectors.push_back(std::vector<float>(row.begin(), row.end()));
    }
    json rec = {{"id", id}, {"level", to_string(table.level())}, {"vectors", vectors}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::string encode_matrix_binary(const Matrix& m) {
  std::string out(kEmbeddingMagic, 4);
  detail::put_u32(out, kEmbeddingBinaryVersion);
  detail::put_u32(out, static_cast<uint32_t>(m.rows));
  detail::put_u32(out, static_cast<uint32_t>(m.cols));
  out.reserve(16 + 4 * m.data.size());
  for (float v : m.data) detail::put_f32(out, v);
  return out;
}

Matrix decode_matrix_binary(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) {
    fail(ErrorKind::kParse, "not an embedding matrix file");
  }
  uint32_t version = detail::get_u32(bytes, 4);
  if (version != kEmbeddingBinaryVersion) {
    fail(ErrorKind::kParse, "unsupported embedding file version " + std::to_string(version));
  }
  Matrix m(detail::get_u32(bytes, 8), detail::get_u32(bytes, 12));
  if (bytes.size() != 16 + 4 * m.data.size()) {
    fail(ErrorKind::kParse, "embedding file size does not match its header");
  }
  for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = detail::get_f32(bytes, 16 + 4 * i);
  return m;
}

}  // namespace seglens
