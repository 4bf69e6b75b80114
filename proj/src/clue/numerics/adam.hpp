#pragma once

#include <cstdint>
#include <vector>

#include "clue/numerics/mlp.hpp"

namespace clue::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

// Bias-corrected Adam update in place. Moments are lazily shaped on the first
// call and must mirror the parameter blocks afterwards. Throws
// training_diverged on a non-finite gradient without touching parameters.
void adam_step(const ParamViews& params, const ConstParamViews& grads, AdamState& state);

}  // namespace clue::nn
