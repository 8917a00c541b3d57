#include <cmath>

#include "io.hpp"
#include "model.hpp"
#include "seglens/error.hpp"

namespace seglens::tagger {

namespace {

const char* kModule = "checkpoint";
constexpr char kMagic[4] = {'S', 'L', 'T', 'K'};
constexpr uint32_t kVersion = 1;

using seglens::detail::get_f32;
using seglens::detail::get_u32;
using seglens::detail::put_f32;
using seglens::detail::put_u32;

struct Reader {
  std::string_view bytes;
  size_t pos = 0;

  void need(size_t n) const {
    if (bytes.size() - pos < n) throw Error(ErrorKind::kParse, kModule, "truncated checkpoint");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = get_u32(bytes, pos);
    pos += 4;
    return v;
  }
  std::string_view str(size_t n) {
    need(n);
    auto s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

std::string encode_checkpoint(const ModelParams& params, const TaggerConfig& config) {
  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  std::string cfg = config_to_json(config);
  put_u32(out, static_cast<uint32_t>(cfg.size()));
  out += cfg;
  put_u32(out, static_cast<uint32_t>(params.input_dim()));
  put_u32(out, static_cast<uint32_t>(params.partition_size()));
  put_u32(out, static_cast<uint32_t>(params.head_size()));
  put_u32(out, static_cast<uint32_t>(params.blocks().size()));
  for (const auto& b : params.blocks()) {
    put_u32(out, static_cast<uint32_t>(b.name.size()));
    out += b.name;
    put_u32(out, static_cast<uint32_t>(b.rows));
    put_u32(out, static_cast<uint32_t>(b.cols));
    for (double v : b.values) put_f32(out, static_cast<float>(v));
  }
  return out;
}

std::pair<ModelParams, TaggerConfig> decode_checkpoint(std::string_view bytes) {
  Reader r{bytes};
  if (r.str(4) != std::string_view(kMagic, 4)) throw Error(ErrorKind::kParse, kModule, "not a tagger checkpoint");
  uint32_t version = r.u32();
  if (version != kVersion) {
    throw Error(ErrorKind::kParse, kModule, "unsupported checkpoint version " + std::to_string(version));
  }
  TaggerConfig config = config_from_json(r.str(r.u32()));
  size_t input_dim = r.u32();
  size_t partition = r.u32();
  size_t head = r.u32();
  if (partition != config.partition_size() || head != config.effective_head_size()) {
    throw Error(ErrorKind::kParse, kModule, "checkpoint shapes disagree with its config");
  }
  ModelParams params = ModelParams::zeros(config, input_dim);
  uint32_t count = r.u32();
  if (count != params.blocks().size()) {
    throw Error(ErrorKind::kParse, kModule, "expected " + std::to_string(params.blocks().size()) +
                                                " parameter blocks, found " + std::to_string(count));
  }
  for (auto& b : params.blocks()) {
    std::string_view name = r.str(r.u32());
    uint32_t rows = r.u32();
    uint32_t cols = r.u32();
    if (name != b.name || rows != b.rows || cols != b.cols) {
      throw Error(ErrorKind::kParse, kModule, "unexpected block " + std::string(name) + " (" +
                                                  std::to_string(rows) + "x" + std::to_string(cols) + ")");
    }
    r.need(b.values.size() * 4);
    for (double& v : b.values) {
      v = get_f32(bytes, r.pos);
      r.pos += 4;
    }
  }
  if (r.pos != bytes.size()) throw Error(ErrorKind::kParse, kModule, "trailing bytes after checkpoint");
  if (!params.all_finite()) throw Error(ErrorKind::kNumeric, kModule, "checkpoint holds non-finite values");
  return {std::move(params), config};
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const TaggerConfig& config) {
  seglens::detail::write_file_atomic(path, encode_checkpoint(params, config), kModule);
}

std::pair<ModelParams, TaggerConfig> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(seglens::detail::read_file(path, kModule));
}

}  // namespace seglens::tagger
