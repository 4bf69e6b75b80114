#include "clue/offline_rl/reward_scaler.hpp"

#include <cmath>

#include "clue/error.hpp"

namespace clue::rl {

const char* to_string(ScaleMode m) {
  switch (m) {
    case ScaleMode::none: return "none";
    case ScaleMode::return_range: return "return_range";
    case ScaleMode::shift: return "shift";
  }
  return "none";
}

ScaleMode scale_mode_from_string(const std::string& s) {
  if (s == "none") return ScaleMode::none;
  if (s == "return_range") return ScaleMode::return_range;
  if (s == "shift") return ScaleMode::shift;
  fail(ErrorCode::invalid_argument, "reward scaling must be 'none', 'return_range' or 'shift', got '" + s + "'");
}

RewardScaler fit_reward_scaler(const data::Dataset& d) {
  const auto stats = data::compute_returns(d);
  const double range = stats.max - stats.min;
  if (!(range > 0.0)) fail(ErrorCode::degenerate_range, "all trajectory returns are equal");
  const double scale = 1000.0 / range;
  if (!std::isfinite(scale)) fail(ErrorCode::degenerate_range, "return range too small to rescale");
  return {scale, ScaleMode::return_range};
}

RewardScaler make_reward_scaler(const data::Dataset& d, ScaleMode mode) {
  if (mode == ScaleMode::none) return {};
  if (mode == ScaleMode::shift) return {1.0, ScaleMode::shift, -1.0};
  try {
    return fit_reward_scaler(d);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate_range) throw;
    warn(std::string(e.what()) + "; rewards left unscaled");
    return {};
  }
}

}  // namespace clue::rl
