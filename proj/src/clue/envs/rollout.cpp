#include "clue/envs/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clue/error.hpp"

namespace clue::env {

data::Trajectory rollout(const PointMaze& maze, const PolicyFn& policy, Rng& rng) {
  data::Trajectory t;
  t.rewards = std::vector<double>{};
  Vector s = maze.reset(rng);
  t.observations.push_back(s);
  bool success = false;
  for (std::size_t k = 0; k < maze.max_steps(); ++k) {
    const Vector a = policy(s, rng).cwiseMax(-1.0).cwiseMin(1.0);
    const StepResult r = maze.step(s, a, k);
    t.actions.push_back(a);
    t.rewards->push_back(r.reward);
    t.terminals.push_back(r.terminal);
    t.observations.push_back(r.next_state);
    s = r.next_state;
    if (r.success) success = true;
    if (r.terminal || r.truncated) break;
  }
  t.success = success;
  return t;
}

data::Trajectory rollout(const PointMaze& maze, BehaviorPolicy& policy, Rng& rng) {
  policy.reset(rng);
  return rollout(maze, [&](const Vector& s, Rng& g) { return policy.act(s, g); }, rng);
}

data::Dataset generate_dataset(const PointMaze& maze, const BehaviorSpec& spec, std::size_t episodes, Rng& rng) {
  return generate_dataset(maze, std::vector<MixtureEntry>{{spec, 1.0}}, episodes, rng);
}

std::vector<std::size_t> allocate_episodes(const std::vector<MixtureEntry>& mixture, std::size_t episodes) {
  double total = 0.0;
  for (const auto& e : mixture) total += e.fraction;
  require(total > 0.0, "mixture fractions sum to zero");
  std::vector<std::size_t> counts(mixture.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < mixture.size(); ++i) {
    const double exact = static_cast<double>(episodes) * mixture[i].fraction / total;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < episodes; ++k, ++assigned) counts[remainders[k % remainders.size()].second] += 1;
  return counts;
}

data::Dataset generate_dataset(const PointMaze& maze, const std::vector<MixtureEntry>& mixture, std::size_t episodes,
                               Rng& rng) {
  require(episodes >= 1, "at least one episode is required");
  const auto counts = allocate_episodes(mixture, episodes);
  std::vector<data::Trajectory> out;
  out.reserve(episodes);
  for (std::size_t i = 0; i < mixture.size(); ++i) {
    BehaviorPolicy policy(maze, mixture[i].spec);
    for (std::size_t e = 0; e < counts[i]; ++e) out.push_back(rollout(maze, policy, rng));
  }
  return data::Dataset::from_trajectories(std::move(out));
}

EvalSummary evaluate(const PointMaze& maze, const PolicyFn& policy, std::size_t episodes, Rng& rng) {
  require(episodes >= 1, "at least one evaluation episode is required");
  EvalSummary s;
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto t = rollout(maze, policy, rng);
    EpisodeRecord r;
    r.total_return = *t.total_return();
    r.success = t.success.value_or(false);
    r.length = t.length();
    r.final_state = t.observations.back();
    s.episodes.push_back(r);
  }
  for (const auto& r : s.episodes) {
    s.mean_return += r.total_return;
    s.success_rate += r.success ? 1.0 : 0.0;
  }
  s.mean_return /= static_cast<double>(episodes);
  s.success_rate /= static_cast<double>(episodes);
  return s;
}

}  // namespace clue::env
