#include "clue/envs/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "clue/error.hpp"
#include "clue/format.hpp"

namespace clue::env {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Paths pay extra for passing closer than kMargin to a wall, so the expert
// keeps to the middle of corridors instead of shaving corners.
constexpr double kMargin = 0.5;
constexpr double kWallPenalty = 4.0;

double clearance(const PointMaze& maze, double x, double y) {
  const Rect& b = maze.bounds();
  double c = std::min({x - b.x0, b.x1 - x, y - b.y0, b.y1 - y});
  for (const auto& w : maze.walls()) {
    const double dx = std::max({w.x0 - x, 0.0, x - w.x1});
    const double dy = std::max({w.y0 - y, 0.0, y - w.y1});
    c = std::min(c, std::hypot(dx, dy));
  }
  return c;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::invalid_argument, "bad " + what + " '" + s + "' in mixture");
  }
}

}  // namespace

std::vector<MixtureEntry> parse_mixture(const std::string& text) {
  std::vector<MixtureEntry> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.rfind(':');
    if (colon == std::string::npos) fail(ErrorCode::invalid_argument, "mixture entry '" + item + "' lacks ':fraction'");
    MixtureEntry e;
    e.fraction = parse_number(item.substr(colon + 1), "fraction");
    if (!(e.fraction >= 0.0)) fail(ErrorCode::invalid_argument, "mixture fractions must be non-negative");
    std::string head = item.substr(0, colon);
    std::string goal;
    if (const auto slash = head.find('/'); slash != std::string::npos) {
      goal = head.substr(slash + 1);
      head = head.substr(0, slash);
    }
    std::string param;
    if (const auto at = head.find('@'); at != std::string::npos) {
      param = head.substr(at + 1);
      head = head.substr(0, at);
    }
    if (head == "random") {
      e.spec.kind = BehaviorKind::random;
      if (!param.empty()) e.spec.hold = static_cast<std::size_t>(std::max(1.0, parse_number(param, "hold")));
    } else if (head == "expert") {
      e.spec.kind = BehaviorKind::waypoint_expert;
      if (!param.empty()) fail(ErrorCode::invalid_argument, "the waypoint expert takes no noise; use 'noisy'");
    } else if (head == "noisy") {
      e.spec.kind = BehaviorKind::noisy_expert;
      e.spec.noise = param.empty() ? 0.3 : parse_number(param, "noise");
    } else {
      fail(ErrorCode::invalid_argument, "unknown behavior policy '" + head + "'");
    }
    if (goal.empty()) {
      e.spec.goal_index = 0;
    } else if (goal != "any") {
      e.spec.goal_index = static_cast<std::size_t>(parse_number(goal, "goal index"));
    }
    out.push_back(e);
  }
  if (out.empty()) fail(ErrorCode::invalid_argument, "empty behavior mixture");
  double total = 0.0;
  for (const auto& e : out) total += e.fraction;
  if (!(total > 0.0)) fail(ErrorCode::invalid_argument, "mixture fractions sum to zero");
  return out;
}

std::string to_string(const BehaviorSpec& spec) {
  std::string s;
  switch (spec.kind) {
    case BehaviorKind::random: s = "random"; if (spec.hold > 1) s += "@" + std::to_string(spec.hold); break;
    case BehaviorKind::waypoint_expert: s = "expert"; break;
    case BehaviorKind::noisy_expert: s = "noisy@" + fmt_double(spec.noise); break;
  }
  if (spec.kind != BehaviorKind::random) s += "/" + (spec.goal_index ? std::to_string(*spec.goal_index) : "any");
  return s;
}

DistanceField::DistanceField(const PointMaze& maze, const Rect& goal, double cell)
    : bounds_(maze.bounds()), goal_(goal), cell_(cell) {
  nx_ = static_cast<long>(std::ceil((bounds_.x1 - bounds_.x0) / cell_ - 1e-9));
  ny_ = static_cast<long>(std::ceil((bounds_.y1 - bounds_.y0) / cell_ - 1e-9));
  free_.assign(static_cast<std::size_t>(nx_ * ny_), 0);
  dist_.assign(free_.size(), kInf);
  std::vector<double> cost(free_.size(), 1.0);
  for (long j = 0; j < ny_; ++j) {
    for (long i = 0; i < nx_; ++i) {
      const Rect c{bounds_.x0 + i * cell_, bounds_.y0 + j * cell_, bounds_.x0 + (i + 1) * cell_,
                   bounds_.y0 + (j + 1) * cell_};
      const bool blocked = std::any_of(maze.walls().begin(), maze.walls().end(),
                                       [&](const Rect& w) { return w.overlaps_interior(c); });
      free_[id(i, j)] = blocked ? 0 : 1;
      const double gap = kMargin - clearance(maze, c.center_x(), c.center_y());
      if (gap > 0.0) cost[id(i, j)] += kWallPenalty * gap / kMargin;
    }
  }
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
  for (long j = 0; j < ny_; ++j) {
    for (long i = 0; i < nx_; ++i) {
      const double cx = bounds_.x0 + (i + 0.5) * cell_;
      const double cy = bounds_.y0 + (j + 0.5) * cell_;
      if (free(i, j) && goal_.contains(cx, cy)) {
        dist_[id(i, j)] = 0.0;
        frontier.emplace(0.0, id(i, j));
      }
    }
  }
  while (!frontier.empty()) {
    const auto [d, k] = frontier.top();
    frontier.pop();
    if (d > dist_[k]) continue;
    const long i = static_cast<long>(k) % nx_;
    const long j = static_cast<long>(k) / nx_;
    for (long dj = -1; dj <= 1; ++dj) {
      for (long di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        if (!free(i + di, j + dj)) continue;
        if (di != 0 && dj != 0 && (!free(i + di, j) || !free(i, j + dj))) continue;
        const double nd = d + ((di != 0 && dj != 0) ? std::sqrt(2.0) : 1.0) * cost[id(i + di, j + dj)];
        if (nd < dist_[id(i + di, j + dj)]) {
          dist_[id(i + di, j + dj)] = nd;
          frontier.emplace(nd, id(i + di, j + dj));
        }
      }
    }
  }
}

bool DistanceField::free(long i, long j) const {
  return i >= 0 && j >= 0 && i < nx_ && j < ny_ && free_[id(i, j)] != 0;
}

double DistanceField::distance(const Vector& state) const {
  const long i = std::clamp(static_cast<long>(std::floor((state[0] - bounds_.x0) / cell_)), 0L, nx_ - 1);
  const long j = std::clamp(static_cast<long>(std::floor((state[1] - bounds_.y0) / cell_)), 0L, ny_ - 1);
  double best = kInf;
  for (long dj = -1; dj <= 1; ++dj)
    for (long di = -1; di <= 1; ++di)
      if (free(i + di, j + dj)) best = std::min(best, dist_[id(i + di, j + dj)] * cell_);
  return best;
}

Vector DistanceField::direction(const Vector& state) const {
  Vector dir = Vector::Zero(2);
  double tx, ty;
  if (goal_.contains(state[0], state[1])) {
    tx = goal_.center_x();
    ty = goal_.center_y();
  } else {
    const long i = std::clamp(static_cast<long>(std::floor((state[0] - bounds_.x0) / cell_)), 0L, nx_ - 1);
    const long j = std::clamp(static_cast<long>(std::floor((state[1] - bounds_.y0) / cell_)), 0L, ny_ - 1);
    const bool here_free = free(i, j);
    double best = here_free ? dist_[id(i, j)] : kInf;
    long bi = i, bj = j;
    for (long dj = -1; dj <= 1; ++dj) {
      for (long di = -1; di <= 1; ++di) {
        if ((di == 0 && dj == 0) || !free(i + di, j + dj)) continue;
        if (here_free && di != 0 && dj != 0 && (!free(i + di, j) || !free(i, j + dj))) continue;
        if (dist_[id(i + di, j + dj)] < best) {
          best = dist_[id(i + di, j + dj)];
          bi = i + di;
          bj = j + dj;
        }
      }
    }
    if (best == kInf) return dir;
    if (bi == i && bj == j) {
      tx = goal_.center_x();
      ty = goal_.center_y();
    } else {
      tx = bounds_.x0 + (bi + 0.5) * cell_;
      ty = bounds_.y0 + (bj + 0.5) * cell_;
    }
  }
  dir[0] = tx - state[0];
  dir[1] = ty - state[1];
  const double n = dir.norm();
  if (n < 1e-12) return Vector::Zero(2);
  // Do not overshoot the target point on the last approach.
  const double scale = std::min(1.0, n / PointMaze::kStepScale) / n;
  return dir * scale;
}

BehaviorPolicy::BehaviorPolicy(const PointMaze& maze, BehaviorSpec spec) : spec_(spec), held_(Vector::Zero(2)) {
  if (spec_.kind != BehaviorKind::random) {
    if (spec_.goal_index && *spec_.goal_index >= maze.goals().size())
      fail(ErrorCode::invalid_argument, "goal index out of range for this maze");
    for (const auto& g : maze.goals()) fields_.emplace_back(maze, g);
    goal_ = spec_.goal_index.value_or(0);
  }
  require(spec_.noise >= 0.0, "noise must be non-negative");
  require(spec_.hold >= 1, "hold must be at least one step");
}

void BehaviorPolicy::reset(Rng& rng) {
  held_for_ = 0;
  if (spec_.kind != BehaviorKind::random && !spec_.goal_index) goal_ = rng.index(fields_.size());
}

Vector BehaviorPolicy::act(const Vector& state, Rng& rng) {
  if (spec_.kind == BehaviorKind::random) {
    if (held_for_ == 0) {
      held_[0] = rng.uniform(-1.0, 1.0);
      held_[1] = rng.uniform(-1.0, 1.0);
    }
    held_for_ = (held_for_ + 1) % spec_.hold;
    return held_;
  }
  Vector a = fields_[goal_].direction(state);
  if (spec_.kind == BehaviorKind::noisy_expert) {
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += spec_.noise * rng.normal();
  }
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace clue::env
