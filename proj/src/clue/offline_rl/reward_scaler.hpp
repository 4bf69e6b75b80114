#pragma once

#include <string>

#include "clue/dataset/dataset.hpp"

namespace clue::rl {

// shift subtracts 1 from every reward, the usual recipe for goal-reaching
// mazes: rewards become non-positive so ending an episode is never a loss.
enum class ScaleMode { none, return_range, shift };

const char* to_string(ScaleMode m);
ScaleMode scale_mode_from_string(const std::string& s);

struct RewardScaler {
  double scale = 1.0;
  ScaleMode mode = ScaleMode::none;
  double offset = 0.0;

  double apply(double r) const { return r * scale + offset; }
};

// scale = 1000 / (max_return - min_return). Throws degenerate_range when every
// trajectory has the same return.
RewardScaler fit_reward_scaler(const data::Dataset& d);

// fit_reward_scaler for mode return_range, falling back to the identity scaler
// (with a warning) on a degenerate return range. shift needs no fitting.
RewardScaler make_reward_scaler(const data::Dataset& d, ScaleMode mode);

}  // namespace clue::rl
