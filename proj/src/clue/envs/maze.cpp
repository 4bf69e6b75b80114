#include "clue/envs/maze.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "clue/error.hpp"

namespace clue::env {

namespace {

using json = nlohmann::ordered_json;

Rect rect_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) fail(ErrorCode::parse_error, what + " must be [x0, y0, x1, y1]");
  Rect r{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!(r.x0 < r.x1 && r.y0 < r.y1)) fail(ErrorCode::validation_error, what + " has non-positive extent");
  return r;
}

json rect_to_json(const Rect& r) { return json::array({r.x0, r.y0, r.x1, r.y1}); }

}  // namespace

PointMaze::PointMaze(Rect bounds, std::vector<Rect> walls, Rect start, std::vector<Rect> goals, std::size_t max_steps)
    : bounds_(bounds), walls_(std::move(walls)), start_(start), goals_(std::move(goals)), max_steps_(max_steps) {
  if (goals_.empty()) fail(ErrorCode::validation_error, "maze needs a goal region");
  if (max_steps_ == 0) fail(ErrorCode::validation_error, "max_steps must be positive");
  for (const auto& w : walls_) {
    if (w.overlaps_interior(start_)) fail(ErrorCode::validation_error, "start region overlaps a wall");
    for (const auto& g : goals_)
      if (w.overlaps_interior(g)) fail(ErrorCode::validation_error, "goal region overlaps a wall");
  }
  if (start_.overlaps_interior(goal())) fail(ErrorCode::validation_error, "start and goal regions overlap");
}

PointMaze PointMaze::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::parse_error, std::string("maze layout: ") + e.what());
  }
  try {
    std::vector<Rect> walls;
    for (const auto& w : j.at("walls")) walls.push_back(rect_from_json(w, "wall"));
    const Rect start = rect_from_json(j.at("start"), "start");
    std::vector<Rect> goals{rect_from_json(j.at("goal"), "goal")};
    if (j.contains("extra_goals"))
      for (const auto& g : j.at("extra_goals")) goals.push_back(rect_from_json(g, "extra goal"));
    Rect bounds;
    if (j.contains("bounds")) {
      bounds = rect_from_json(j.at("bounds"), "bounds");
    } else {
      bounds = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
                std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
      auto grow = [&](const Rect& r) {
        bounds.x0 = std::min(bounds.x0, r.x0);
        bounds.y0 = std::min(bounds.y0, r.y0);
        bounds.x1 = std::max(bounds.x1, r.x1);
        bounds.y1 = std::max(bounds.y1, r.y1);
      };
      for (const auto& w : walls) grow(w);
      grow(start);
      for (const auto& g : goals) grow(g);
    }
    PointMaze m(bounds, std::move(walls), start, std::move(goals), j.at("max_steps").get<std::size_t>());
    if (j.value("reward", std::string("sparse")) == "dense") m.set_reward_kind(RewardKind::dense);
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("maze layout: ") + e.what());
  }
}

PointMaze PointMaze::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::io_error, "cannot open layout '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

std::string PointMaze::to_json() const {
  json j;
  json walls = json::array();
  for (const auto& w : walls_) walls.push_back(rect_to_json(w));
  j["walls"] = walls;
  j["start"] = rect_to_json(start_);
  j["goal"] = rect_to_json(goal());
  if (goals_.size() > 1) {
    json extra = json::array();
    for (std::size_t i = 1; i < goals_.size(); ++i) extra.push_back(rect_to_json(goals_[i]));
    j["extra_goals"] = extra;
  }
  j["bounds"] = rect_to_json(bounds_);
  j["max_steps"] = max_steps_;
  if (reward_kind_ == RewardKind::dense) j["reward"] = "dense";
  return j.dump();
}

Vector PointMaze::reset(Rng& rng) const {
  Vector s(2);
  s[0] = rng.uniform(start_.x0, start_.x1);
  s[1] = rng.uniform(start_.y0, start_.y1);
  return s;
}

double segment_entry(const Rect& r, double px, double py, double dx, double dy) {
  double t_enter = 0.0;
  double t_exit = 1.0;
  auto slab = [&](double p, double d, double lo, double hi) {
    if (d == 0.0) {
      if (!(p > lo && p < hi)) t_enter = 2.0;  // parallel and outside the open slab
      return;
    }
    double a = (lo - p) / d;
    double b = (hi - p) / d;
    if (a > b) std::swap(a, b);
    t_enter = std::max(t_enter, a);
    t_exit = std::min(t_exit, b);
  };
  slab(px, dx, r.x0, r.x1);
  slab(py, dy, r.y0, r.y1);
  if (t_enter < t_exit && t_enter <= 1.0) return t_enter;
  return -1.0;
}

Vector PointMaze::move(const Vector& state, const Vector& delta) const {
  double t_hit = 1.0;
  int hit = -1;
  for (std::size_t i = 0; i < walls_.size(); ++i) {
    const double t = segment_entry(walls_[i], state[0], state[1], delta[0], delta[1]);
    if (t >= 0.0 && t < t_hit) {
      t_hit = t;
      hit = static_cast<int>(i);
    }
  }
  Vector next = state + t_hit * delta;
  if (hit >= 0) {
    // Snap the coordinate(s) on the face that was crossed so rounding cannot
    // leave the point inside the wall.
    const Rect& w = walls_[static_cast<std::size_t>(hit)];
    if (delta[0] > 0.0 && state[0] <= w.x0 && next[0] > w.x0) next[0] = w.x0;
    if (delta[0] < 0.0 && state[0] >= w.x1 && next[0] < w.x1) next[0] = w.x1;
    if (delta[1] > 0.0 && state[1] <= w.y0 && next[1] > w.y0) next[1] = w.y0;
    if (delta[1] < 0.0 && state[1] >= w.y1 && next[1] < w.y1) next[1] = w.y1;
    if (w.interior_contains(next[0], next[1])) next = state;
  }
  next[0] = std::clamp(next[0], bounds_.x0, bounds_.x1);
  next[1] = std::clamp(next[1], bounds_.y0, bounds_.y1);
  return next;
}

StepResult PointMaze::step(const Vector& state, const Vector& action, std::size_t t) const {
  require(state.size() == 2 && action.size() == 2, "pointmaze states and actions are 2-D");
  Vector a = action.cwiseMax(-1.0).cwiseMin(1.0);
  StepResult r;
  r.next_state = move(state, kStepScale * a);
  r.success = in_goal(r.next_state);
  if (reward_kind_ == RewardKind::sparse) {
    r.reward = r.success ? 1.0 : 0.0;
  } else {
    const double dx = r.next_state[0] - goal().center_x();
    const double dy = r.next_state[1] - goal().center_y();
    r.reward = -std::sqrt(dx * dx + dy * dy);
  }
  r.terminal = r.success;
  r.truncated = !r.terminal && t + 1 >= max_steps_;
  return r;
}

bool PointMaze::in_wall(const Vector& state) const {
  return std::any_of(walls_.begin(), walls_.end(),
                     [&](const Rect& w) { return w.interior_contains(state[0], state[1]); });
}

int PointMaze::quadrant(const Vector& state) const {
  const bool right = state[0] >= bounds_.center_x();
  const bool up = state[1] >= bounds_.center_y();
  if (right && up) return 0;
  if (!right && up) return 1;
  if (!right && !up) return 2;
  return 3;
}

}  // namespace clue::env
