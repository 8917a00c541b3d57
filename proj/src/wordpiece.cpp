#include "seglens/wordpiece.hpp"

#include "io.hpp"
#include "json.hpp"
#include "seglens/error.hpp"
#include "seglens/text.hpp"

namespace seglens {

using nlohmann::json;

namespace {

const char* kModule = "wordpiece";

bool starts_with(std::string_view s, std::string_view prefix) {
  return !prefix.empty() && s.substr(0, prefix.size()) == prefix;
}

}  // namespace

Vocab::Vocab(std::vector<std::string> entries, VocabOptions options)
    : entries_(std::move(entries)), options_(std::move(options)) {
  index_.reserve(entries_.size());
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i], static_cast<long>(i)).second) {
      throw Error(ErrorKind::kValidation, kModule,
                  "duplicate vocabulary entry \"" + entries_[i] + "\" at line " +
                      std::to_string(i + 1));
    }
  }
  if (!index_.contains(options_.unk_token)) {
    throw Error(ErrorKind::kValidation, kModule,
                "vocabulary lacks the unk token \"" + options_.unk_token + "\"");
  }
  if (options_.max_chars_per_word == 0) {
    throw Error(ErrorKind::kArgument, kModule, "max_chars_per_word must be positive");
  }
}

bool Vocab::contains(std::string_view piece) const { return index_.find(piece) != index_.end(); }

long Vocab::rank(std::string_view piece) const {
  auto it = index_.find(piece);
  return it == index_.end() ? -1 : it->second;
}

Vocab parse_vocab(std::string_view text, VocabOptions options) {
  std::vector<std::string> entries;
  size_t start = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    size_t stop = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(start, stop - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      throw Error(ErrorKind::kParse, kModule,
                  "empty vocabulary entry at line " + std::to_string(entries.size() + 1));
    }
    entries.emplace_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return Vocab(std::move(entries), std::move(options));
}

Vocab load_vocab(const std::filesystem::path& path, VocabOptions options) {
  return parse_vocab(detail::read_file(path, kModule), std::move(options));
}

std::string normalize_word(std::string_view word, Casing mode) {
  if (mode == Casing::kCased) return std::string(word);
  return text::strip_accents(text::to_lower(word));
}

std::vector<std::string> tokenize_word(std::string_view word, const Vocab& vocab) {
  if (word.empty()) throw Error(ErrorKind::kArgument, kModule, "cannot tokenize an empty word");
  auto offsets = text::codepoint_offsets(word);
  size_t chars = offsets.size() - 1;
  if (chars > vocab.max_chars_per_word()) return {vocab.unk_token()};

  std::vector<std::string> pieces;
  std::string candidate;
  size_t start = 0;
  while (start < chars) {
    size_t end = chars;
    bool found = false;
    while (start < end) {
      candidate.clear();
      if (start > 0) candidate = vocab.continuation_prefix();
      candidate.append(word.substr(offsets[start], offsets[end] - offsets[start]));
      if (vocab.contains(candidate)) {
        found = true;
        break;
      }
      --end;
    }
    if (!found) return {vocab.unk_token()};
    pieces.push_back(candidate);
    start = end;
  }
  return pieces;
}

std::string detokenize(const std::vector<std::string>& pieces, const Vocab& vocab) {
  if (pieces.empty()) throw Error(ErrorKind::kArgument, kModule, "nothing to detokenize");
  const auto& prefix = vocab.continuation_prefix();
  if (starts_with(pieces.front(), prefix)) {
    throw Error(ErrorKind::kArgument, kModule,
                "first piece \"" + pieces.front() + "\" carries the continuation prefix");
  }
  std::string out = pieces.front();
  for (size_t i = 1; i < pieces.size(); ++i) {
    std::string_view p = pieces[i];
    if (starts_with(p, prefix)) p.remove_prefix(prefix.size());
    out += p;
  }
  return out;
}

ExternalTokenization parse_external_tokenization(std::string_view json_text,
                                                 const Corpus& corpus) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, kModule, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorKind::kParse, kModule, "top level is not an array");
  ExternalTokenization out;
  for (const auto& rec : doc) {
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("pieces")) {
      throw Error(ErrorKind::kParse, kModule, "record lacks \"id\" or \"pieces\"");
    }
    std::string id = rec["id"].is_string() ? rec["id"].get<std::string>()
                                           : rec["id"].dump();
    auto si = corpus.find(id);
    if (!si) throw Error(ErrorKind::kValidation, kModule, "sentence " + id + " is not in the corpus");
    const auto& words = corpus[*si].words;
    const auto& pieces = rec["pieces"];
    if (!pieces.is_array()) throw Error(ErrorKind::kParse, kModule, "sentence " + id + ": \"pieces\" is not an array");
    if (pieces.size() != words.size()) {
      throw Error(ErrorKind::kValidation, kModule,
                  "sentence " + id + ": " + std::to_string(pieces.size()) +
                      " piece lists for " + std::to_string(words.size()) + " words");
    }
    std::vector<std::vector<std::string>> per_word;
    per_word.reserve(words.size());
    for (size_t w = 0; w < pieces.size(); ++w) {
      if (!pieces[w].is_array() || pieces[w].empty()) {
        throw Error(ErrorKind::kValidation, kModule,
                    "sentence " + id + ": word " + std::to_string(w) + " has no pieces");
      }
      std::vector<std::string> list;
      for (const auto& p : pieces[w]) {
        if (!p.is_string()) throw Error(ErrorKind::kParse, kModule, "sentence " + id + ": non-string piece");
        list.push_back(p.get<std::string>());
      }
      per_word.push_back(std::move(list));
    }
    if (!out.pieces.emplace(id, std::move(per_word)).second) {
      throw Error(ErrorKind::kValidation, kModule, "sentence " + id + " listed twice");
    }
  }
  return out;
}

ExternalTokenization ingest_external_tokenization(const std::filesystem::path& path,
                                                  const Corpus& corpus) {
  return parse_external_tokenization(detail::read_file(path, kModule), corpus);
}

WordPieceSource::WordPieceSource(std::shared_ptr<const Vocab> vocab, Casing normalization,
                                 std::string name)
    : vocab_(std::move(vocab)), normalization_(normalization), name_(std::move(name)) {}

std::vector<std::string> WordPieceSource::pieces(const Corpus& corpus, size_t sentence,
                                                 size_t word) const {
  return tokenize_word(normalize_word(corpus[sentence].words[word], normalization_), *vocab_);
}

std::vector<std::string> WordPieceSource::pieces_for_surface(std::string_view word,
                                                             const Corpus&, size_t,
                                                             size_t) const {
  return tokenize_word(normalize_word(word, normalization_), *vocab_);
}

ExternalPieceSource::ExternalPieceSource(ExternalTokenization tokenization, std::string name)
    : tokenization_(std::move(tokenization)), name_(std::move(name)) {}

std::vector<std::string> ExternalPieceSource::pieces(const Corpus& corpus, size_t sentence,
                                                     size_t word) const {
  const auto& id = corpus[sentence].id;
  auto it = tokenization_.pieces.find(id);
  if (it == tokenization_.pieces.end()) {
    throw Error(ErrorKind::kValidation, kModule,
                "external tokenization does not cover sentence " + id);
  }
  if (word >= it->second.size()) {
    throw Error(ErrorKind::kValidation, kModule,
                "external tokenization of sentence " + id + " lacks word " + std::to_string(word));
  }
  return it->second[word];
}

std::vector<std::string> ExternalPieceSource::pieces_for_surface(std::string_view,
                                                                 const Corpus& corpus,
                                                                 size_t sentence,
                                                                 size_t word_index) const {
  return pieces(corpus, sentence, word_index);
}

}  // namespace seglens
