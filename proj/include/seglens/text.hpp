#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace seglens::text {

// Byte offsets of every code point start in a UTF-8 string, plus a final
// entry equal to s.size(). Invalid sequences are treated as single bytes.
std::vector<size_t> codepoint_offsets(std::string_view s);

size_t codepoint_count(std::string_view s);

// Unicode full lowercase (root locale).
std::string to_lower(std::string_view s);

// Canonical decomposition followed by removal of nonspacing marks (Mn).
std::string strip_accents(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace seglens::text
