#pragma once

#include <memory>
#include <optional>

#include "clue/cvae/cvae.hpp"
#include "clue/dataset/dataset.hpp"
#include "clue/rng.hpp"

namespace clue::reward {

using nn::Matrix;
using nn::Vector;

enum class SamplingMode { mean, sample };

const char* to_string(SamplingMode m);
SamplingMode sampling_mode_from_string(const std::string& s);

// Mean of the expert posterior means over every expert transition.
Vector expert_anchor(const cvae::CvaeModel& m, const data::Dataset& expert);

// exp(-c * |z_e - z(s,a)|^2) over a frozen encoder.
class RewardLabeler {
 public:
  RewardLabeler(std::shared_ptr<const cvae::CvaeModel> model, Vector anchor, double temperature,
                SamplingMode mode = SamplingMode::mean);

  const Vector& anchor() const { return anchor_; }
  double temperature() const { return temperature_; }
  SamplingMode mode() const { return mode_; }
  const cvae::CvaeModel& model() const { return *model_; }

  // rng is only consulted in sample mode.
  double reward(const Vector& state, const Vector& action, Rng* rng = nullptr) const;
  Vector rewards(const Matrix& states, const Matrix& actions, Rng* rng = nullptr) const;

  static double from_distance(double squared_distance, double temperature);

 private:
  std::shared_ptr<const cvae::CvaeModel> model_;
  Vector anchor_;
  double temperature_;
  SamplingMode mode_;
};

// Replaces every reward with the intrinsic reward. Rewards already present are
// moved to original_rewards unless that side channel is already populated.
data::Dataset relabel(const RewardLabeler& labeler, const data::Dataset& d, Rng* rng = nullptr);

// Rank-based ROC AUC of scores separating positives from negatives (ties count
// half).
double roc_auc(const std::vector<double>& positive_scores, const std::vector<double>& negative_scores);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Spearman correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace clue::reward
