#include "clue/numerics/adam.hpp"

#include <cmath>

#include "clue/error.hpp"

namespace clue::nn {

void adam_step(const ParamViews& params, const ConstParamViews& grads, AdamState& state) {
  require(params.size() == grads.size(), "parameter and gradient block counts differ");
  for (std::size_t b = 0; b < params.size(); ++b) {
    require(params[b].size() == grads[b].size(), "parameter and gradient block sizes differ");
    for (double g : grads[b]) {
      if (!std::isfinite(g)) fail(ErrorCode::training_diverged, "non-finite gradient in Adam update");
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  require(state.first_moment.size() == params.size(), "Adam moments do not mirror the parameters");

  state.step += 1;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    require(m.size() == params[b].size(), "Adam moments do not mirror the parameters");
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      params[b][i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace clue::nn
