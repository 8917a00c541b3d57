#pragma once

// Internal helpers shared by the core modules.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace seglens::detail {

// Throws seglens::Error(kIo) naming `module` on failure.
std::string read_file(const std::filesystem::path& path, std::string_view module);

// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes,
                       std::string_view module);

// Fixed-point formatting with round-half-away-from-zero on the decimal value.
std::string format_fixed(double value, int decimals);

// Portable draws from a 64-bit generator; std distributions are not specified
// bit-for-bit across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next();
  // Uniform on [0, bound).
  uint64_t below(uint64_t bound);
  // Uniform on [0, 1).
  double uniform();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

void put_u32(std::string& out, uint32_t v);
void put_f32(std::string& out, float v);
uint32_t get_u32(std::string_view bytes, size_t offset);
float get_f32(std::string_view bytes, size_t offset);

}  // namespace seglens::detail
