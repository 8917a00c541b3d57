#pragma once

#include <stdexcept>
#include <string>

namespace seglens {

enum class ErrorKind {
  kParse,       // malformed input file
  kValidation,  // input parses but violates a data invariant
  kIo,          // file cannot be opened or written
  kArgument,    // caller passed an argument outside the operation's domain
  kNumeric,     // computation produced a non-finite value
};

// Every error raised by the library carries the name of the module that
// raised it, e.g. "corpus: sentence 12: entity end 9 exceeds 7 words".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& module, const std::string& message)
      : std::runtime_error(module + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace seglens
