#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace gridkit {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Error category carried across the C API boundary as a status code.
enum class ErrorCode { Parse = 1, Invalid = 2, Numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail_parse(const std::string& msg) {
  throw Error(ErrorCode::Parse, msg);
}
[[noreturn]] inline void fail_invalid(const std::string& msg) {
  throw Error(ErrorCode::Invalid, msg);
}
[[noreturn]] inline void fail_numeric(const std::string& msg) {
  throw Error(ErrorCode::Numeric, msg);
}

}  // namespace gridkit
