#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clue/dataset/dataset.hpp"
#include "clue/numerics/adam.hpp"
#include "clue/numerics/mlp.hpp"
#include "clue/offline_rl/reward_scaler.hpp"
#include "clue/rng.hpp"

namespace clue::rl {

using nn::Matrix;
using nn::Vector;

inline constexpr double kPolicyLogStdMin = -5.0;
inline constexpr double kPolicyLogStdMax = 2.0;

struct IqlConfig {
  std::vector<std::size_t> hidden{256, 256};
  double expectile = 0.7;
  double awr_temperature = 3.0;
  double discount = 0.99;
  double polyak = 0.005;
  double learning_rate = 3e-4;
  std::size_t batch_size = 256;
  double dropout = 0.0;  // policy only
  double awr_clip = 100.0;
  ScaleMode reward_scaling = ScaleMode::return_range;

  void validate() const;
};

struct IqlBatch {
  Matrix states;
  Matrix actions;
  Matrix next_states;
  Vector rewards;
  Vector terminals;

  Eigen::Index size() const { return states.rows(); }
};

class IqlAgent {
 public:
  static IqlAgent create(std::size_t state_dim, std::size_t action_dim, const IqlConfig& config, Rng& rng);

  nn::Mlp value;
  nn::Mlp q1, q2;
  nn::Mlp q1_target, q2_target;
  nn::Mlp policy;  // tanh-squashed action mean
  Vector log_std;  // state independent, clamped on use

  IqlConfig config;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  data::StateStats state_stats;
  RewardScaler scaler;

  nn::AdamState value_opt, critic_opt, policy_opt;

  Matrix normalize(const Matrix& states) const { return state_stats.normalize_rows(states); }
  Vector clamped_log_std() const;
};

// |tau - 1(u < 0)| * u^2
double expectile_loss(double u, double tau);
double expectile_loss_derivative(double u, double tau);

Matrix state_action(const Matrix& states, const Matrix& actions);

// Elementwise minimum of the two target critics.
Vector target_q(const IqlAgent& agent, const IqlBatch& batch);

// Expectile regression of V(s) towards min target Q(s,a).
double value_loss(const IqlAgent& agent, const IqlBatch& batch, nn::MlpGradients* grad = nullptr);

// r * scale + discount * (1 - terminal) * V(s').
Vector td_targets(const IqlAgent& agent, const IqlBatch& batch);

double critic_loss(const IqlAgent& agent, const IqlBatch& batch, nn::MlpGradients* grad_q1 = nullptr,
                   nn::MlpGradients* grad_q2 = nullptr);

// min(exp(beta * (min target Q - V)), clip)
Vector awr_weights(const IqlAgent& agent, const IqlBatch& batch);

struct PolicyGradients {
  nn::MlpGradients net;
  Vector log_std;
};

// -mean(w * log N(a | mean(s), std)); dropout_rng enables the policy dropout
// configured on the agent.
double awr_loss(const IqlAgent& agent, const IqlBatch& batch, PolicyGradients* grad = nullptr,
                Rng* dropout_rng = nullptr);

// target = rho * online + (1 - rho) * target
void polyak_update(nn::Mlp& target, const nn::Mlp& online, double rho);

struct StepReport {
  double v_loss = 0.0;
  double q_loss = 0.0;
  double pi_loss = 0.0;
};

// One IQL update: value, critics, policy, then target averaging. Throws
// training_diverged when any loss is non-finite.
StepReport train_step(IqlAgent& agent, const IqlBatch& batch, Rng& rng);

Vector act(const IqlAgent& agent, const Vector& state, bool deterministic, Rng* rng = nullptr);

struct CurveRow {
  std::size_t step = 0;
  double v_loss = 0.0;
  double q_loss = 0.0;
  double pi_loss = 0.0;
  double eval_return = 0.0;
  double eval_success_rate = 0.0;
};

struct EvalScore {
  double mean_return = 0.0;
  double success_rate = 0.0;
};

struct TrainOptions {
  std::size_t eval_interval = 0;  // 0 logs only at the end
  std::function<EvalScore(const IqlAgent&)> evaluator;
};

struct TrainResult {
  std::vector<CurveRow> curves;
  bool diverged = false;
  std::string message;
};

// Fits state normalization and the reward scaler from `d`, then runs `steps`
// updates on minibatches drawn with replacement.
TrainResult train(IqlAgent& agent, const data::Dataset& d, std::size_t steps, Rng& rng,
                  const TrainOptions& options = {});

IqlBatch sample_batch(const data::TransitionTable& table, std::size_t batch_size, Rng& rng);

std::string curves_csv(const std::vector<CurveRow>& rows);

void save_agent(const IqlAgent& agent, const std::filesystem::path& ckpt);
IqlAgent load_agent(const std::filesystem::path& ckpt);

}  // namespace clue::rl
