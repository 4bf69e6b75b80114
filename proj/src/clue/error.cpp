#include "clue/error.hpp"

#include <iostream>
#include <mutex>

namespace clue {

namespace {
std::mutex sink_mutex;
void to_stderr(const std::string& m) { std::cerr << "warning: " << m << '\n'; }
WarningSink& sink() {
  static WarningSink s = to_stderr;
  return s;
}
}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::parse_error: return "parse error";
    case ErrorCode::validation_error: return "validation error";
    case ErrorCode::training_diverged: return "training diverged";
    case ErrorCode::no_expert_found: return "no expert found";
    case ErrorCode::missing_rewards: return "missing rewards";
    case ErrorCode::degenerate_range: return "degenerate return range";
    case ErrorCode::io_error: return "i/o error";
    case ErrorCode::partial_failure: return "partial failure";
  }
  return "unknown error";
}

void set_warning_sink(WarningSink s) {
  std::lock_guard lock(sink_mutex);
  sink() = s ? std::move(s) : WarningSink(to_stderr);
}

void warn(const std::string& message) {
  std::lock_guard lock(sink_mutex);
  sink()(message);
}

}  // namespace clue
