#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clue/numerics/mlp.hpp"
#include "clue/rng.hpp"

namespace clue::data {

using nn::Matrix;
using nn::Vector;

struct Transition {
  Vector state;
  Vector action;
  std::optional<double> reward;
  Vector next_state;
  bool terminal = false;
};

// Episode in the on-disk layout: observations has one more entry than
// actions, the last being the final next_state.
struct Trajectory {
  std::vector<Vector> observations;
  std::vector<Vector> actions;
  std::optional<std::vector<double>> rewards;
  std::vector<bool> terminals;
  std::optional<bool> success;
  // Rewards that were in place before relabeling, kept for comparisons.
  std::optional<std::vector<double>> original_rewards;

  std::size_t length() const { return actions.size(); }
  std::optional<double> total_return() const;
  Transition transition(std::size_t t) const;
};

struct StateStats {
  Vector mean;
  Vector std;

  Vector normalize(const Vector& s) const;
  Vector denormalize(const Vector& s) const;
  Matrix normalize_rows(const Matrix& states) const;
  static StateStats identity(std::size_t dim);
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;

  bool reward_labeled() const;
  std::size_t transition_count() const;
  // Throws validation_error on any broken invariant.
  void validate() const;

  static Dataset from_trajectories(std::vector<Trajectory> trajectories);
};

// Flat column view used for minibatch sampling; row i is the i-th transition
// in trajectory order.
struct TransitionTable {
  Matrix states;
  Matrix actions;
  Matrix next_states;
  Vector rewards;    // zero where unlabeled
  Vector terminals;  // 0/1
  bool labeled = false;

  std::size_t size() const { return static_cast<std::size_t>(states.rows()); }
  static TransitionTable from(const Dataset& d);
  static TransitionTable concat(const TransitionTable& a, const TransitionTable& b);
};

Dataset load(const std::filesystem::path& path);
void save(const Dataset& d, const std::filesystem::path& path);
std::string to_jsonl(const Dataset& d);
Dataset from_jsonl(const std::string& text);

// A trajectory's success: the explicit flag when present, otherwise whether
// any task reward is positive (original_rewards win over relabeled ones).
bool is_success(const Trajectory& t);

struct ExpertSplit {
  Dataset expert;
  Dataset rest;
  std::vector<std::size_t> expert_indices;
};

// Picks the k successful trajectories with the highest return (earliest index
// wins ties). Returns fewer when fewer succeed; throws no_expert_found when
// none do. With strip_rest_rewards the rest split keeps its rewards only in
// original_rewards.
ExpertSplit filter_expert_by_success(const Dataset& d, std::size_t k, bool strip_rest_rewards = false);

struct ReturnStats {
  std::vector<double> returns;
  double min = 0.0;
  double max = 0.0;
};

// Undiscounted per-trajectory sums; throws missing_rewards when unlabeled.
ReturnStats compute_returns(const Dataset& d);

struct NormalizeResult {
  Dataset dataset;
  StateStats stats;
  std::vector<std::string> warnings;
};

// Z-scores every observation with per-dimension population statistics taken
// over all observations. Standard deviations are floored at 1e-6.
NormalizeResult normalize_states(const Dataset& d);
Dataset denormalize_states(const Dataset& d, const StateStats& stats);

StateStats fit_state_stats(const Dataset& d);

// Random subset of whole trajectories holding `fraction` of them (at least one).
Dataset subsample(const Dataset& d, double fraction, Rng& rng);

Dataset strip_rewards(const Dataset& d);

}  // namespace clue::data
