#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seglens/corpus.hpp"

namespace seglens {

struct VocabOptions {
  std::string unk_token = "[UNK]";
  std::string continuation_prefix = "##";
  size_t max_chars_per_word = 100;
};

class Vocab {
 public:
  // Throws on duplicate entries or a missing unk token.
  Vocab(std::vector<std::string> entries, VocabOptions options = {});

  size_t size() const { return entries_.size(); }
  const std::vector<std::string>& entries() const { return entries_; }
  bool contains(std::string_view piece) const;
  // -1 when absent.
  long rank(std::string_view piece) const;

  const std::string& unk_token() const { return options_.unk_token; }
  const std::string& continuation_prefix() const {
    return options_.continuation_prefix;
  }
  size_t max_chars_per_word() const { return options_.max_chars_per_word; }

 private:
  struct Hash {
    using is_transparent = void;
    size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::vector<std::string> entries_;
  std::unordered_map<std::string, long, Hash, std::equal_to<>> index_;
  VocabOptions options_;
};

// One subword per line; rank is the zero-based line number.
Vocab load_vocab(const std::filesystem::path& path, VocabOptions options = {});
Vocab parse_vocab(std::string_view text, VocabOptions options = {});

std::string normalize_word(std::string_view word, Casing mode);

// Greedy longest-match-first. Returns {unk} when some position has no match
// or the word is longer than max_chars_per_word code points.
std::vector<std::string> tokenize_word(std::string_view word, const Vocab& vocab);

std::string detokenize(const std::vector<std::string>& pieces,
                       const Vocab& vocab);

// Per sentence id, the subword list of every word.
struct ExternalTokenization {
  std::unordered_map<std::string, std::vector<std::vector<std::string>>> pieces;
};

ExternalTokenization parse_external_tokenization(std::string_view json_text,
                                                 const Corpus& corpus);
ExternalTokenization ingest_external_tokenization(
    const std::filesystem::path& path, const Corpus& corpus);

// A source of word pieces for words of a corpus. Vocab-driven sources ignore
// the occurrence; external sources look it up.
class PieceSource {
 public:
  virtual ~PieceSource() = default;

  virtual std::vector<std::string> pieces(const Corpus& corpus,
                                          size_t sentence,
                                          size_t word) const = 0;

  // Pieces for an arbitrary surface word whose first occurrence is given.
  // Used by the unique-word statistics, which may have case-folded the word.
  virtual std::vector<std::string> pieces_for_surface(
      std::string_view word, const Corpus& corpus, size_t sentence,
      size_t word_index) const = 0;

  virtual std::string name() const = 0;
};

class WordPieceSource final : public PieceSource {
 public:
  WordPieceSource(std::shared_ptr<const Vocab> vocab, Casing normalization,
                  std::string name = "wordpiece");

  std::vector<std::string> pieces(const Corpus& corpus, size_t sentence,
                                  size_t word) const override;
  std::vector<std::string> pieces_for_surface(std::string_view word,
                                              const Corpus& corpus,
                                              size_t sentence,
                                              size_t word_index) const override;
  std::string name() const override { return name_; }

  const Vocab& vocab() const { return *vocab_; }

 private:
  std::shared_ptr<const Vocab> vocab_;
  Casing normalization_;
  std::string name_;
};

class ExternalPieceSource final : public PieceSource {
 public:
  ExternalPieceSource(ExternalTokenization tokenization,
                      std::string name = "external");

  // Throws when the sentence is not covered.
  std::vector<std::string> pieces(const Corpus& corpus, size_t sentence,
                                  size_t word) const override;
  std::vector<std::string> pieces_for_surface(std::string_view word,
                                              const Corpus& corpus,
                                              size_t sentence,
                                              size_t word_index) const override;
  std::string name() const override { return name_; }

 private:
  ExternalTokenization tokenization_;
  std::string name_;
};

}  // namespace seglens
