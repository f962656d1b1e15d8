#pragma once

#include <stdexcept>
#include <string>

namespace odil {

// Error categories aligned with the CLI exit-code contract:
// 2 = configuration error, 3 = data error, 4 = runtime numeric failure.
enum class ErrorCode : int {
  config = 2,
  data = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }
  int exit_code() const { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail_config(const std::string& msg) {
  throw Error(ErrorCode::config, msg);
}
[[noreturn]] inline void fail_data(const std::string& msg) {
  throw Error(ErrorCode::data, msg);
}
[[noreturn]] inline void fail_numeric(const std::string& msg) {
  throw Error(ErrorCode::numeric, msg);
}

}  // namespace odil
