#include <cmath>

#include "io.hpp"
#include "json.hpp"
#include "model.hpp"
#include "seglens/error.hpp"

namespace seglens::tagger {

using nlohmann::json;

namespace detail {

const char* const kBlockNames[kBlockCount] = {
    "encoder.candidate.W",     "encoder.candidate.b",     "encoder.entity_gate.W",
    "encoder.entity_gate.b",   "encoder.relation_gate.W", "encoder.relation_gate.b",
    "encoder.memory.W",        "encoder.memory.b",        "ner.start.W",
    "ner.end.W",               "ner.hidden.b",            "ner.out.W",
    "ner.out.b",               "re.head.W",               "re.tail.W",
    "re.hidden.b",             "re.out.W",                "re.out.b",
};

}  // namespace detail

namespace {

const char* kModule = "tagger";

}  // namespace

void TaggerConfig::validate() const {
  if (hidden_size == 0 || hidden_size % 3 != 0) {
    throw Error(ErrorKind::kArgument, kModule, "hidden size must be a positive multiple of 3");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kArgument, kModule, "learning rate must be positive");
  if (batch_size == 0) throw Error(ErrorKind::kArgument, kModule, "batch size must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorKind::kArgument, kModule, "decision threshold must lie in (0, 1)");
  }
  if (max_span_width == 0) throw Error(ErrorKind::kArgument, kModule, "max span width must be positive");
  if (!(positive_weight > 0.0)) throw Error(ErrorKind::kArgument, kModule, "positive weight must be positive");
  if (partition_size() > 65535) throw Error(ErrorKind::kArgument, kModule, "hidden size too large");
}

std::string config_to_json(const TaggerConfig& c) {
  json j = {{"hidden_size", c.hidden_size},
            {"head_size", c.head_size},
            {"aggregation", to_string(c.aggregation)},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"threshold", c.threshold},
            {"max_span_width", c.max_span_width},
            {"positive_weight", c.positive_weight}};
  return j.dump();
}

TaggerConfig config_from_json(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, kModule, std::string("invalid config JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::kParse, kModule, "config is not an object");
  TaggerConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "hidden_size") c.hidden_size = value.get<size_t>();
      else if (key == "head_size") c.head_size = value.get<size_t>();
      else if (key == "aggregation") {
        auto a = parse_aggregation(value.get<std::string>());
        if (!a) throw Error(ErrorKind::kParse, kModule, "unknown aggregation " + value.dump());
        c.aggregation = *a;
      } else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<size_t>();
      else if (key == "epochs") c.epochs = value.get<size_t>();
      else if (key == "seed") c.seed = value.get<uint64_t>();
      else if (key == "threshold") c.threshold = value.get<double>();
      else if (key == "max_span_width") c.max_span_width = value.get<size_t>();
      else if (key == "positive_weight") c.positive_weight = value.get<double>();
      else throw Error(ErrorKind::kParse, kModule, "unknown config key \"" + key + "\"");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, kModule, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ModelParams::ModelParams(size_t input_dim, size_t partition, size_t head)
    : input_dim_(input_dim), partition_(partition), head_(head) {
  using namespace detail;
  const size_t m = partition;
  const size_t z = input_dim + m;
  const size_t shapes[kBlockCount][2] = {
      {m, z},     {m, 1},      {m, z},      {m, 1},      {m, z},     {m, 1},
      {m, 3 * m}, {m, 1},      {head, 2 * m}, {head, 2 * m}, {head, 1}, {kEntityLabelCount, head},
      {kEntityLabelCount, 1},  {head, 2 * m}, {head, 2 * m}, {head, 1},
      {kRelationLabelCount, head}, {kRelationLabelCount, 1},
  };
  blocks_.reserve(kBlockCount);
  for (size_t b = 0; b < kBlockCount; ++b) {
    blocks_.push_back({kBlockNames[b], shapes[b][0], shapes[b][1],
                       std::vector<double>(shapes[b][0] * shapes[b][1], 0.0)});
  }
}

ModelParams ModelParams::zeros(const TaggerConfig& config, size_t input_dim) {
  config.validate();
  if (input_dim == 0) throw Error(ErrorKind::kArgument, kModule, "input dimension must be positive");
  return ModelParams(input_dim, config.partition_size(), config.effective_head_size());
}

ModelParams ModelParams::random(const TaggerConfig& config, size_t input_dim, uint64_t seed) {
  ModelParams p = zeros(config, input_dim);
  seglens::detail::Rng rng(seed);
  for (auto& b : p.blocks_) {
    if (b.cols == 1) continue;  // biases stay zero
    double limit = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
    for (double& v : b.values) v = (2.0 * rng.uniform() - 1.0) * limit;
  }
  return p;
}

const ParamBlock& ModelParams::block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw Error(ErrorKind::kArgument, kModule, "no parameter block " + std::string(name));
}

ParamBlock& ModelParams::block(std::string_view name) {
  return const_cast<ParamBlock&>(std::as_const(*this).block(name));
}

size_t ModelParams::parameter_count() const {
  size_t n = 0;
  for (const auto& b : blocks_) n += b.values.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& b : blocks_) {
    for (double v : b.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams p = *this;
  for (auto& b : p.blocks_) std::fill(b.values.begin(), b.values.end(), 0.0);
  return p;
}

std::vector<double> flatten(const ModelParams& params) {
  std::vector<double> out;
  out.reserve(params.parameter_count());
  for (const auto& b : params.blocks()) out.insert(out.end(), b.values.begin(), b.values.end());
  return out;
}

void unflatten(std::span<const double> flat, ModelParams& params) {
  if (flat.size() != params.parameter_count()) {
    throw Error(ErrorKind::kArgument, kModule, "flat vector size does not match the parameters");
  }
  size_t off = 0;
  for (auto& b : params.blocks()) {
    std::copy(flat.begin() + static_cast<long>(off),
              flat.begin() + static_cast<long>(off + b.values.size()), b.values.begin());
    off += b.values.size();
  }
}

}  // namespace seglens::tagger
