#include "clue/reward/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clue/error.hpp"

namespace clue::reward {

const char* to_string(SamplingMode m) { return m == SamplingMode::mean ? "mean" : "sample"; }

SamplingMode sampling_mode_from_string(const std::string& s) {
  if (s == "mean") return SamplingMode::mean;
  if (s == "sample") return SamplingMode::sample;
  fail(ErrorCode::invalid_argument, "sampling mode must be 'mean' or 'sample', got '" + s + "'");
}

Vector expert_anchor(const cvae::CvaeModel& m, const data::Dataset& expert) {
  const auto table = data::TransitionTable::from(expert);
  require(table.size() > 0, "expert anchor needs at least one expert transition");
  const auto latent = cvae::encode_batch(m, table.states, table.actions);
  return latent.mean.colwise().mean().transpose();
}

RewardLabeler::RewardLabeler(std::shared_ptr<const cvae::CvaeModel> model, Vector anchor, double temperature,
                             SamplingMode mode)
    : model_(std::move(model)), anchor_(std::move(anchor)), temperature_(temperature), mode_(mode) {
  require(model_ != nullptr, "labeler needs a model");
  require(temperature_ > 0.0 && std::isfinite(temperature_), "temperature must be positive");
  require(static_cast<std::size_t>(anchor_.size()) == model_->latent_dim, "anchor length must equal latent dim");
}

double RewardLabeler::from_distance(double squared_distance, double temperature) {
  return std::exp(-temperature * squared_distance);
}

double RewardLabeler::reward(const Vector& state, const Vector& action, Rng* rng) const {
  return rewards(Matrix(state.transpose()), Matrix(action.transpose()), rng)[0];
}

Vector RewardLabeler::rewards(const Matrix& states, const Matrix& actions, Rng* rng) const {
  const auto latent = cvae::encode_batch(*model_, states, actions);
  Matrix z = latent.mean;
  if (mode_ == SamplingMode::sample) {
    require(rng != nullptr, "sample mode needs a generator");
    Matrix eps(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng->normal();
    z = cvae::reparameterize(latent, eps);
  }
  Vector out(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    out[i] = from_distance((z.row(i).transpose() - anchor_).squaredNorm(), temperature_);
  return out;
}

data::Dataset relabel(const RewardLabeler& labeler, const data::Dataset& d, Rng* rng) {
  data::Dataset out = d;
  for (auto& t : out.trajectories) {
    const auto n = static_cast<Eigen::Index>(t.length());
    Matrix s(n, static_cast<Eigen::Index>(d.state_dim)), a(n, static_cast<Eigen::Index>(d.action_dim));
    for (Eigen::Index k = 0; k < n; ++k) {
      s.row(k) = t.observations[static_cast<std::size_t>(k)].transpose();
      a.row(k) = t.actions[static_cast<std::size_t>(k)].transpose();
    }
    const Vector r = labeler.rewards(s, a, rng);
    if (t.rewards && !t.original_rewards) t.original_rewards = t.rewards;
    t.rewards = std::vector<double>(r.data(), r.data() + r.size());
  }
  return out;
}

double roc_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  require(!pos.empty() && !neg.empty(), "AUC needs both classes");
  double wins = 0.0;
  std::vector<double> sorted_neg = neg;
  std::sort(sorted_neg.begin(), sorted_neg.end());
  for (double p : pos) {
    const auto lo = std::lower_bound(sorted_neg.begin(), sorted_neg.end(), p);
    const auto hi = std::upper_bound(sorted_neg.begin(), sorted_neg.end(), p);
    wins += static_cast<double>(lo - sorted_neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "correlation needs two equal-length series");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

namespace {
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}
}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) { return pearson(ranks(x), ranks(y)); }

}  // namespace clue::reward
