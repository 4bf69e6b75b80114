#pragma once

#include <functional>
#include <vector>

#include "clue/numerics/mlp.hpp"

namespace clue::nn {

struct GradCheckReport {
  // One entry per parameter block (for an Mlp: weight then bias per layer).
  std::vector<double> max_relative_error;
  double tolerance = 1e-4;

  double max_error() const;
  bool passed() const { return max_error() < tolerance; }
};

// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero entries from
// amplifying finite-difference noise.
double relative_error(double analytic, double numeric, double floor = 1e-6);

// Compares analytic gradients against central differences of `loss`, which
// must read the current values behind `params`.
GradCheckReport check_gradients(const ParamViews& params, const ConstParamViews& analytic,
                                const std::function<double()>& loss, double tolerance = 1e-4,
                                double step = 1e-5);

// Scalar loss of a network output; writes dLoss/dOutput into `grad`.
using OutputLoss = std::function<double(const Matrix& output, Matrix& grad)>;

GradCheckReport grad_check(Mlp& net, const Matrix& input, const OutputLoss& loss, double tolerance = 1e-4,
                           double step = 1e-5);

}  // namespace clue::nn
