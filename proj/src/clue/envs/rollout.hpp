#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "clue/dataset/dataset.hpp"
#include "clue/envs/maze.hpp"
#include "clue/envs/policies.hpp"

namespace clue::env {

// Any state -> action mapping; the generator is available to stochastic
// policies.
using PolicyFn = std::function<Vector(const Vector& state, Rng& rng)>;

data::Trajectory rollout(const PointMaze& maze, const PolicyFn& policy, Rng& rng);
data::Trajectory rollout(const PointMaze& maze, BehaviorPolicy& policy, Rng& rng);

data::Dataset generate_dataset(const PointMaze& maze, const BehaviorSpec& spec, std::size_t episodes, Rng& rng);

// Episodes are split across entries in proportion to their fractions (largest
// remainder rounding) and concatenated in entry order.
data::Dataset generate_dataset(const PointMaze& maze, const std::vector<MixtureEntry>& mixture,
                               std::size_t episodes, Rng& rng);
std::vector<std::size_t> allocate_episodes(const std::vector<MixtureEntry>& mixture, std::size_t episodes);

struct EpisodeRecord {
  double total_return = 0.0;
  bool success = false;
  std::size_t length = 0;
  Vector final_state;
};

struct EvalSummary {
  double mean_return = 0.0;
  double success_rate = 0.0;
  std::vector<EpisodeRecord> episodes;
};

EvalSummary evaluate(const PointMaze& maze, const PolicyFn& policy, std::size_t episodes, Rng& rng);

}  // namespace clue::env
