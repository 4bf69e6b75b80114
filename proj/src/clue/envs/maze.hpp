#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "clue/numerics/mlp.hpp"
#include "clue/rng.hpp"

namespace clue::env {

using nn::Vector;

struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  bool interior_contains(double x, double y) const { return x > x0 && x < x1 && y > y0 && y < y1; }
  bool overlaps_interior(const Rect& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }
};

enum class RewardKind { sparse, dense };

struct StepResult {
  Vector next_state;
  double reward = 0.0;
  bool terminal = false;   // goal reached
  bool truncated = false;  // step limit hit without reaching the goal
  bool success = false;
};

// Continuous 2-D pointmass. Position moves by 0.1 * clip(a, -1, 1) per step,
// stops at the first wall it would enter and stays inside the arena bounds.
class PointMaze {
 public:
  static constexpr double kStepScale = 0.1;

  PointMaze(Rect bounds, std::vector<Rect> walls, Rect start, std::vector<Rect> goals, std::size_t max_steps);

  static PointMaze from_json(const std::string& text);
  static PointMaze load(const std::filesystem::path& path);
  std::string to_json() const;

  const Rect& bounds() const { return bounds_; }
  const std::vector<Rect>& walls() const { return walls_; }
  const Rect& start() const { return start_; }
  // goals()[0] is the task goal; extra goals exist for multi-goal data.
  const std::vector<Rect>& goals() const { return goals_; }
  const Rect& goal() const { return goals_.front(); }
  std::size_t max_steps() const { return max_steps_; }

  RewardKind reward_kind() const { return reward_kind_; }
  void set_reward_kind(RewardKind k) { reward_kind_ = k; }

  Vector reset(Rng& rng) const;
  // `t` is the zero-based index of this step within the episode.
  StepResult step(const Vector& state, const Vector& action, std::size_t t) const;
  // Collision-resolved position after moving by `delta` (already scaled).
  Vector move(const Vector& state, const Vector& delta) const;

  bool in_wall(const Vector& state) const;
  bool in_goal(const Vector& state) const { return goal().contains(state[0], state[1]); }
  // 0..3 counter-clockwise from the upper-right quadrant around the arena centre.
  int quadrant(const Vector& state) const;

 private:
  Rect bounds_;
  std::vector<Rect> walls_;
  Rect start_;
  std::vector<Rect> goals_;
  std::size_t max_steps_;
  RewardKind reward_kind_ = RewardKind::sparse;
};

// First entry time in [0, 1] of the segment p + t*d into the open interior of
// r, or a negative value when it never enters.
double segment_entry(const Rect& r, double px, double py, double dx, double dy);

}  // namespace clue::env
