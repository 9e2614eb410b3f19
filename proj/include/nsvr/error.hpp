#pragma once

#include <stdexcept>
#include <string>

namespace nsvr {

// Numeric values are mirrored by nsvr_status in nsvr.h.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kDomain = 2,
  kNotPositiveDefinite = 3,
  kRankDeficient = 4,
  kIo = 5,
  kParse = 6,
  kNotConverged = 7,
  kOverflow = 8,
  kDimensionMismatch = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace nsvr
