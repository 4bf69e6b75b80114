#include "clue/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "clue/error.hpp"

namespace clue::nn {

double GradCheckReport::max_error() const {
  double m = 0.0;
  for (double e : max_relative_error) m = std::max(m, e);
  return m;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const ParamViews& params, const ConstParamViews& analytic,
                                const std::function<double()>& loss, double tolerance, double step) {
  require(params.size() == analytic.size(), "gradient block count mismatch");
  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t b = 0; b < params.size(); ++b) {
    require(params[b].size() == analytic[b].size(), "gradient block size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double saved = params[b][i];
      params[b][i] = saved + step;
      const double up = loss();
      params[b][i] = saved - step;
      const double down = loss();
      params[b][i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      worst = std::max(worst, relative_error(analytic[b][i], numeric));
    }
    report.max_relative_error.push_back(worst);
  }
  return report;
}

GradCheckReport grad_check(Mlp& net, const Matrix& input, const OutputLoss& loss, double tolerance, double step) {
  Tape tape;
  Matrix out = net.forward(input, tape);
  Matrix grad(out.rows(), out.cols());
  loss(out, grad);
  const MlpGradients analytic = net.backward(tape, grad);
  auto value = [&] {
    Matrix o = net.forward(input);
    Matrix scratch(o.rows(), o.cols());
    return loss(o, scratch);
  };
  return check_gradients(net.parameters(), analytic.views(), value, tolerance, step);
}

}  // namespace clue::nn
