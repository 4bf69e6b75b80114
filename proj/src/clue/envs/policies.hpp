#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "clue/envs/maze.hpp"

namespace clue::env {

enum class BehaviorKind { random, noisy_expert, waypoint_expert };

struct BehaviorSpec {
  BehaviorKind kind = BehaviorKind::random;
  double noise = 0.0;                       // Gaussian action noise for noisy_expert
  std::size_t hold = 1;                     // random: steps each random action is repeated
  std::optional<std::size_t> goal_index;    // experts: fixed goal; empty = resample per episode
};

struct MixtureEntry {
  BehaviorSpec spec;
  double fraction = 0.0;
};

// "kind[@noise][/goal]:fraction" entries separated by commas, e.g.
// "expert:0.05,random:0.95" or "noisy@0.3/any:1". kind is one of random,
// expert (waypoint expert) or noisy; goal is an index into the maze goals or
// "any". A random kind reads "@k" as the action hold length instead.
std::vector<MixtureEntry> parse_mixture(const std::string& text);
std::string to_string(const BehaviorSpec& spec);

// Shortest-path distance field on a square grid over free space, used to
// steer the scripted experts.
class DistanceField {
 public:
  DistanceField(const PointMaze& maze, const Rect& goal, double cell = 0.25);

  // Unit-length direction towards the goal, or zero when unreachable.
  Vector direction(const Vector& state) const;
  // Path cost to the goal in env units, wall penalty included.
  double distance(const Vector& state) const;

 private:
  bool free(long i, long j) const;
  std::size_t id(long i, long j) const { return static_cast<std::size_t>(j * nx_ + i); }

  Rect bounds_;
  Rect goal_;
  double cell_;
  long nx_ = 0, ny_ = 0;
  std::vector<char> free_;
  std::vector<double> dist_;
};

class BehaviorPolicy {
 public:
  BehaviorPolicy(const PointMaze& maze, BehaviorSpec spec);

  // Starts a new episode; experts with an open goal pick one here.
  void reset(Rng& rng);
  Vector act(const Vector& state, Rng& rng);

  const BehaviorSpec& spec() const { return spec_; }
  std::size_t current_goal() const { return goal_; }

 private:
  BehaviorSpec spec_;
  std::vector<DistanceField> fields_;
  std::size_t goal_ = 0;
  std::size_t held_for_ = 0;
  Vector held_;
};

}  // namespace clue::env
