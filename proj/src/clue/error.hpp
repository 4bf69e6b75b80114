#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace clue {

enum class ErrorCode {
  invalid_argument = 1,
  parse_error,
  validation_error,
  training_diverged,
  no_expert_found,
  missing_rewards,
  degenerate_range,
  io_error,
  partial_failure,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::invalid_argument, what);
}

// Warnings go through a process-wide sink so tests and the C API can capture
// them. An empty sink restores the default stderr writer.
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace clue
