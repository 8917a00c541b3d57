#include "seglens/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "io.hpp"
#include "json.hpp"
#include "seglens/error.hpp"
#include "seglens/text.hpp"

namespace seglens {

using nlohmann::json;

namespace {

const char* kModule = "corpus";

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, kModule, msg);
}

std::string sentence_tag(const std::string& id) { return "sentence " + id; }

size_t count_overlaps(const Sentence& s) {
  size_t n = 0;
  for (size_t i = 0; i < s.entities.size(); ++i) {
    for (size_t j = i + 1; j < s.entities.size(); ++j) {
      const auto& a = s.entities[i];
      const auto& b = s.entities[j];
      if (a.start < b.end && b.start < a.end) ++n;
    }
  }
  return n;
}

size_t json_index(const json& v, const std::string& id, const char* field) {
  if (!v.is_number_integer()) {
    fail(ErrorKind::kParse, sentence_tag(id) + ": \"" + field + "\" is not an integer");
  }
  auto x = v.get<long long>();
  if (x < 0) {
    fail(ErrorKind::kValidation,
         sentence_tag(id) + ": negative \"" + field + "\" " + std::to_string(x));
  }
  return static_cast<size_t>(x);
}

Sentence sentence_from_json(const json& obj, size_t position) {
  if (!obj.is_object()) {
    fail(ErrorKind::kParse, "record " + std::to_string(position) + " is not an object");
  }
  Sentence s;
  if (auto it = obj.find("id"); it != obj.end()) {
    if (it->is_string()) {
      s.id = it->get<std::string>();
    } else if (it->is_number_integer()) {
      s.id = std::to_string(it->get<long long>());
    } else {
      fail(ErrorKind::kParse, "record " + std::to_string(position) + ": bad \"id\"");
    }
  } else {
    s.id = std::to_string(position);
  }

  auto tokens = obj.find("tokens");
  if (tokens == obj.end() || !tokens->is_array()) {
    fail(ErrorKind::kParse, sentence_tag(s.id) + ": missing \"tokens\" array");
  }
  for (const auto& t : *tokens) {
    if (!t.is_string()) fail(ErrorKind::kParse, sentence_tag(s.id) + ": non-string token");
    s.words.push_back(t.get<std::string>());
  }

  if (auto ents = obj.find("entities"); ents != obj.end()) {
    if (!ents->is_array()) fail(ErrorKind::kParse, sentence_tag(s.id) + ": \"entities\" is not an array");
    for (const auto& e : *ents) {
      if (!e.is_object() || !e.contains("type") || !e["type"].is_string()) {
        fail(ErrorKind::kParse, sentence_tag(s.id) + ": malformed entity");
      }
      auto type = e["type"].get<std::string>();
      auto label = parse_entity_label(type);
      if (!label) {
        fail(ErrorKind::kValidation, sentence_tag(s.id) + ": unknown entity label \"" + type + "\"");
      }
      EntityMention m;
      m.label = *label;
      m.start = json_index(e.value("start", json()), s.id, "start");
      m.end = json_index(e.value("end", json()), s.id, "end");
      s.entities.push_back(m);
    }
  }

  if (auto rels = obj.find("relations"); rels != obj.end()) {
    if (!rels->is_array()) fail(ErrorKind::kParse, sentence_tag(s.id) + ": \"relations\" is not an array");
    for (const auto& r : *rels) {
      if (!r.is_object() || !r.contains("type") || !r["type"].is_string()) {
        fail(ErrorKind::kParse, sentence_tag(s.id) + ": malformed relation");
      }
      auto type = r["type"].get<std::string>();
      auto label = parse_relation_label(type);
      if (!label) {
        fail(ErrorKind::kValidation, sentence_tag(s.id) + ": unknown relation label \"" + type + "\"");
      }
      RelationMention m;
      m.label = *label;
      m.head = json_index(r.value("head", json()), s.id, "head");
      m.tail = json_index(r.value("tail", json()), s.id, "tail");
      s.relations.push_back(m);
    }
  }
  return s;
}

}  // namespace

std::string_view to_string(EntityLabel label) {
  switch (label) {
    case EntityLabel::kDrug: return "Drug";
    case EntityLabel::kAdverseEffect: return "Adverse-Effect";
  }
  return "?";
}

std::string_view to_string(RelationLabel label) {
  switch (label) {
    case RelationLabel::kAdverseEffectOf: return "Adverse-Effect";
  }
  return "?";
}

std::string_view to_string(Casing casing) {
  return casing == Casing::kCased ? "cased" : "uncased";
}

std::optional<EntityLabel> parse_entity_label(std::string_view s) {
  if (s == "Drug") return EntityLabel::kDrug;
  if (s == "Adverse-Effect" || s == "AdverseEffect" || s == "AE") {
    return EntityLabel::kAdverseEffect;
  }
  return std::nullopt;
}

std::optional<RelationLabel> parse_relation_label(std::string_view s) {
  if (s == "Adverse-Effect" || s == "AdverseEffectOf" || s == "Adverse_Effect") {
    return RelationLabel::kAdverseEffectOf;
  }
  return std::nullopt;
}

std::optional<Casing> parse_casing(std::string_view s) {
  if (s == "cased") return Casing::kCased;
  if (s == "uncased") return Casing::kUncased;
  return std::nullopt;
}

void validate_sentence(const Sentence& s) {
  if (s.words.empty()) fail(ErrorKind::kValidation, sentence_tag(s.id) + ": no words");
  for (size_t i = 0; i < s.words.size(); ++i) {
    if (s.words[i].empty()) {
      fail(ErrorKind::kValidation, sentence_tag(s.id) + ": word " + std::to_string(i) + " is empty");
    }
  }
  for (const auto& e : s.entities) {
    if (e.start >= e.end) {
      fail(ErrorKind::kValidation, sentence_tag(s.id) + ": entity [" + std::to_string(e.start) +
                                       ", " + std::to_string(e.end) + ") is empty");
    }
    if (e.end > s.words.size()) {
      fail(ErrorKind::kValidation, sentence_tag(s.id) + ": entity end " + std::to_string(e.end) +
                                       " exceeds " + std::to_string(s.words.size()) + " words");
    }
  }
  for (const auto& r : s.relations) {
    if (r.head >= s.entities.size() || r.tail >= s.entities.size()) {
      fail(ErrorKind::kValidation, sentence_tag(s.id) + ": relation references entity " +
                                       std::to_string(std::max(r.head, r.tail)) + " of " +
                                       std::to_string(s.entities.size()));
    }
    if (r.head == r.tail) {
      fail(ErrorKind::kValidation, sentence_tag(s.id) + ": relation head equals tail");
    }
  }
}

Corpus::Corpus(std::vector<Sentence> sentences) : sentences_(std::move(sentences)) {
  index_.reserve(sentences_.size());
  for (size_t i = 0; i < sentences_.size(); ++i) {
    const auto& s = sentences_[i];
    validate_sentence(s);
    if (!index_.emplace(s.id, i).second) {
      fail(ErrorKind::kValidation, "duplicate sentence id " + s.id);
    }
    summary_.overlapping_spans += count_overlaps(s);
  }
}

std::optional<size_t> Corpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Sentence& Corpus::at(std::string_view id) const {
  auto i = find(id);
  if (!i) fail(ErrorKind::kArgument, "unknown sentence id " + std::string(id));
  return sentences_[*i];
}

Corpus Corpus::subset(const std::vector<std::string>& ids) const {
  std::vector<Sentence> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(at(id));
  return Corpus(std::move(out));
}

Corpus parse_corpus_json(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) fail(ErrorKind::kParse, "top level is not an array");
  std::vector<Sentence> sentences;
  sentences.reserve(doc.size());
  for (size_t i = 0; i < doc.size(); ++i) sentences.push_back(sentence_from_json(doc[i], i));
  return Corpus(std::move(sentences));
}

Corpus load_corpus(const std::filesystem::path& path) {
  return parse_corpus_json(detail::read_file(path, kModule));
}

std::string serialize_corpus(const Corpus& corpus) {
  json doc = json::array();
  for (const auto& s : corpus.sentences()) {
    json ents = json::array();
    for (const auto& e : s.entities) {
      ents.push_back({{"type", to_string(e.label)}, {"start", e.start}, {"end", e.end}});
    }
    json rels = json::array();
    for (const auto& r : s.relations) {
      rels.push_back({{"type", to_string(r.label)}, {"head", r.head}, {"tail", r.tail}});
    }
    doc.push_back({{"id", s.id}, {"tokens", s.words}, {"entities", ents}, {"relations", rels}});
  }
  return doc.dump() + "\n";
}

namespace {

void carve_dev(Fold& fold, std::vector<std::string> pool, double dev_fraction, uint64_t seed) {
  detail::Rng rng(seed);
  rng.shuffle(pool);
  auto n_dev = static_cast<size_t>(std::llround(dev_fraction * static_cast<double>(pool.size())));
  fold.dev_ids.assign(pool.begin(), pool.begin() + static_cast<long>(n_dev));
  fold.train_ids.assign(pool.begin() + static_cast<long>(n_dev), pool.end());
}

void check_options(const FoldOptions& o) {
  if (o.k < 2) fail(ErrorKind::kArgument, "k must be at least 2");
  if (!(o.dev_fraction > 0.0 && o.dev_fraction < 1.0)) {
    fail(ErrorKind::kArgument, "dev fraction must lie in (0, 1)");
  }
}

// Per-fold dev seeds differ so folds do not share a dev permutation.
uint64_t dev_seed(uint64_t seed, size_t fold) { return seed * 1000003ULL + fold; }

}  // namespace

FoldPlan make_folds(const Corpus& corpus, const FoldOptions& options) {
  check_options(options);
  if (options.k > corpus.size()) {
    fail(ErrorKind::kArgument, "k = " + std::to_string(options.k) + " exceeds the " +
                                   std::to_string(corpus.size()) + " sentences; some test folds would be empty");
  }
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& s : corpus.sentences()) ids.push_back(s.id);
  detail::Rng rng(options.seed);
  rng.shuffle(ids);

  FoldPlan plan{options.k, options.dev_fraction, options.seed, false, {}};
  size_t n = ids.size();
  size_t base = n / options.k;
  size_t extra = n % options.k;
  size_t begin = 0;
  for (size_t f = 0; f < options.k; ++f) {
    size_t len = base + (f < extra ? 1 : 0);
    Fold fold;
    fold.test_ids.assign(ids.begin() + static_cast<long>(begin),
                         ids.begin() + static_cast<long>(begin + len));
    std::vector<std::string> pool;
    pool.insert(pool.end(), ids.begin(), ids.begin() + static_cast<long>(begin));
    pool.insert(pool.end(), ids.begin() + static_cast<long>(begin + len), ids.end());
    carve_dev(fold, std::move(pool), options.dev_fraction, dev_seed(options.seed, f));
    plan.folds.push_back(std::move(fold));
    begin += len;
  }
  return plan;
}

FoldPlan make_folds(const Corpus& corpus, const FoldOptions& options,
                    const std::vector<std::vector<size_t>>& external_tests) {
  FoldOptions o = options;
  o.k = external_tests.size();
  check_options(o);
  std::vector<int> seen(corpus.size(), -1);
  for (size_t f = 0; f < external_tests.size(); ++f) {
    for (size_t i : external_tests[f]) {
      if (i >= corpus.size()) {
        fail(ErrorKind::kValidation, "fold " + std::to_string(f) + " lists sentence " +
                                         std::to_string(i) + " beyond " +
                                         std::to_string(corpus.size()) + " sentences");
      }
      if (seen[i] >= 0) {
        fail(ErrorKind::kValidation, "sentence " + std::to_string(i) + " appears in folds " +
                                         std::to_string(seen[i]) + " and " + std::to_string(f));
      }
      seen[i] = static_cast<int>(f);
    }
  }
  for (size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] < 0) {
      fail(ErrorKind::kValidation, "external folds do not cover sentence " + std::to_string(i));
    }
  }

  FoldPlan plan{o.k, o.dev_fraction, o.seed, true, {}};
  for (size_t f = 0; f < external_tests.size(); ++f) {
    Fold fold;
    for (size_t i : external_tests[f]) fold.test_ids.push_back(corpus[i].id);
    std::vector<std::string> pool;
    for (size_t i = 0; i < corpus.size(); ++i) {
      if (seen[i] != static_cast<int>(f)) pool.push_back(corpus[i].id);
    }
    carve_dev(fold, std::move(pool), o.dev_fraction, dev_seed(o.seed, f));
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

std::vector<size_t> load_fold_file(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(detail::read_file(path, kModule));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) fail(ErrorKind::kParse, path.string() + ": fold file is not an array");
  std::vector<size_t> out;
  for (const auto& v : doc) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      fail(ErrorKind::kParse, path.string() + ": fold entries must be non-negative integers");
    }
    out.push_back(v.get<size_t>());
  }
  return out;
}

std::string serialize_fold_plan(const FoldPlan& plan) {
  json folds = json::array();
  for (const auto& f : plan.folds) {
    folds.push_back({{"train", f.train_ids}, {"dev", f.dev_ids}, {"test", f.test_ids}});
  }
  json doc = {{"k", plan.k},
              {"dev_fraction", plan.dev_fraction},
              {"seed", plan.seed},
              {"external", plan.external},
              {"folds", folds}};
  return doc.dump(2) + "\n";
}

std::vector<EntitySurface> unique_entity_surfaces(const Corpus& corpus, EntityLabel label,
                                                  Casing casing) {
  std::vector<EntitySurface> out;
  std::set<std::string> seen;
  for (size_t si = 0; si < corpus.size(); ++si) {
    const auto& s = corpus[si];
    for (const auto& e : s.entities) {
      if (e.label != label) continue;
      std::vector<std::string> words(s.words.begin() + static_cast<long>(e.start),
                                     s.words.begin() + static_cast<long>(e.end));
      std::string surface = text::join(words, " ");
      if (casing == Casing::kUncased) surface = text::to_lower(surface);
      if (seen.insert(surface).second) {
        out.push_back({surface, e.length(), si, e.start});
      }
    }
  }
  return out;
}

std::string_view to_string(WordClass c) {
  switch (c) {
    case WordClass::kDrug: return "Drug";
    case WordClass::kAdverseEffect: return "Adverse-Effect";
    case WordClass::kOut: return "Out";
  }
  return "?";
}

WordClass word_class(EntityLabel label) {
  return label == EntityLabel::kDrug ? WordClass::kDrug : WordClass::kAdverseEffect;
}

const std::map<std::string, WordOccurrence>& WordIndex::of(WordClass c) const {
  static const std::map<std::string, WordOccurrence> kEmpty;
  auto it = words.find(c);
  return it == words.end() ? kEmpty : it->second;
}

WordIndex entity_word_index(const Corpus& corpus, Casing casing) {
  WordIndex index;
  index.words[WordClass::kDrug];
  index.words[WordClass::kAdverseEffect];
  auto& out = index.words[WordClass::kOut];
  std::map<std::string, WordOccurrence> all;
  std::set<std::string> in_entity;
  for (size_t si = 0; si < corpus.size(); ++si) {
    const auto& s = corpus[si];
    std::vector<std::string> keys;
    keys.reserve(s.words.size());
    for (size_t w = 0; w < s.words.size(); ++w) {
      keys.push_back(casing == Casing::kUncased ? text::to_lower(s.words[w]) : s.words[w]);
      all.emplace(keys.back(), WordOccurrence{si, w});
    }
    for (const auto& e : s.entities) {
      auto& set = index.words[word_class(e.label)];
      for (size_t w = e.start; w < e.end; ++w) {
        set.emplace(keys[w], WordOccurrence{si, w});
        in_entity.insert(keys[w]);
      }
    }
  }
  for (auto& [word, occ] : all) {
    if (!in_entity.contains(word)) out.emplace(word, occ);
  }
  return index;
}

}  // namespace seglens
