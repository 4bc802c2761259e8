#pragma once

#include <stdexcept>
#include <string>

namespace spdmark {

enum class Errc {
  invalid_argument = 1,
  dimension_mismatch = 2,
  parse = 3,
  io = 4,
  internal = 5,
};

// All failures inside the core surface as spdmark::Error; the C API maps
// `code()` onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

inline void require(bool cond, Errc code, const char* what) {
  if (!cond) fail(code, what);
}

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace spdmark
