#include "io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "seglens/error.hpp"

namespace seglens::detail {

std::string read_file(const std::filesystem::path& path,
                      std::string_view module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, std::string(module),
                "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes,
                       std::string_view module) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorKind::kIo, std::string(module),
                  "cannot write " + tmp.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw Error(ErrorKind::kIo, std::string(module),
                  "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorKind::kIo, std::string(module),
                "cannot rename " + tmp.string() + ": " + ec.message());
  }
}

std::string format_fixed(double value, int decimals) {
  double scale = std::pow(10.0, decimals);
  // Nudge by a relative epsilon so values like 2.675 (stored as 2.67499..)
  // round the way their decimal spelling suggests.
  double scaled = value * scale;
  double rounded = std::round(scaled * (1.0 + 4 * std::numeric_limits<double>::epsilon()));
  if (rounded == 0.0) rounded = 0.0;  // no "-0.0"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded / scale);
  return buf;
}

uint64_t Rng::next() {
  // splitmix64
  uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t Rng::below(uint64_t bound) {
  if (bound <= 1) return 0;
  uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % bound;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

uint32_t get_u32(std::string_view bytes, size_t offset) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

float get_f32(std::string_view bytes, size_t offset) {
  return std::bit_cast<float>(get_u32(bytes, offset));
}

}  // namespace seglens::detail
