#include "clue/skills/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "clue/error.hpp"

namespace clue::skills {

namespace {

Matrix seed_plus_plus(const Matrix& x, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  Matrix c(static_cast<Eigen::Index>(k), x.cols());
  std::vector<char> chosen(n, 0);
  std::size_t first = rng.index(n);
  c.row(0) = x.row(static_cast<Eigen::Index>(first));
  chosen[first] = 1;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (x.row(static_cast<Eigen::Index>(i)) - c.row(0)).squaredNorm();
  for (std::size_t m = 1; m < k; ++m) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        u -= d2[i];
        if (u < 0.0) break;
      }
    }
    if (pick == n) {
      // Every point coincides with a centre already; take an unused index.
      std::vector<std::size_t> unused;
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) unused.push_back(i);
      pick = unused[rng.index(unused.size())];
    }
    chosen[pick] = 1;
    c.row(static_cast<Eigen::Index>(m)) = x.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(m))).squaredNorm());
  }
  return c;
}

// Returns the number of changed assignments.
std::size_t assign(const Matrix& x, const Matrix& c, std::vector<std::size_t>& a) {
  std::size_t changed = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      const double d = (x.row(i) - c.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<std::size_t>(j);
      }
    }
    if (a[static_cast<std::size_t>(i)] != arg) ++changed;
    a[static_cast<std::size_t>(i)] = arg;
  }
  return changed;
}

void repair_empty(const Matrix& x, Matrix& c, std::vector<std::size_t>& a) {
  const auto k = static_cast<std::size_t>(c.rows());
  std::vector<std::size_t> sizes(k, 0);
  for (auto id : a) ++sizes[id];
  for (std::size_t j = 0; j < k; ++j) {
    if (sizes[j] > 0) continue;
    double worst = -1.0;
    std::size_t far = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (sizes[a[i]] < 2) continue;
      const double d = (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(a[i]))).squaredNorm();
      if (d > worst) {
        worst = d;
        far = i;
      }
    }
    if (worst < 0.0) continue;
    --sizes[a[far]];
    a[far] = j;
    sizes[j] = 1;
    c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(far));
  }
}

void update_centroids(const Matrix& x, Matrix& c, const std::vector<std::size_t>& a) {
  Matrix sum = Matrix::Zero(c.rows(), c.cols());
  std::vector<double> count(static_cast<std::size_t>(c.rows()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum.row(static_cast<Eigen::Index>(a[i])) += x.row(static_cast<Eigen::Index>(i));
    count[a[i]] += 1.0;
  }
  for (Eigen::Index j = 0; j < c.rows(); ++j)
    if (count[static_cast<std::size_t>(j)] > 0.0) c.row(j) = sum.row(j) / count[static_cast<std::size_t>(j)];
}

ClusterModel lloyd(const Matrix& x, std::size_t k, std::size_t max_iter, Rng& rng) {
  ClusterModel m;
  m.k = k;
  m.feature_stats = data::StateStats::identity(static_cast<std::size_t>(x.cols()));
  m.centroids = seed_plus_plus(x, k, rng);
  m.assignment.assign(static_cast<std::size_t>(x.rows()), k);
  for (std::size_t it = 0; it < max_iter; ++it) {
    const std::size_t changed = assign(x, m.centroids, m.assignment);
    repair_empty(x, m.centroids, m.assignment);
    m.iterations = it + 1;
    if (changed == 0 && it > 0) {
      m.converged = true;
      break;
    }
    update_centroids(x, m.centroids, m.assignment);
    m.inertia_history.push_back(inertia_of(x, m.centroids, m.assignment));
  }
  m.inertia = inertia_of(x, m.centroids, m.assignment);
  return m;
}

}  // namespace

std::vector<std::size_t> ClusterModel::cluster_sizes() const {
  std::vector<std::size_t> s(k, 0);
  for (auto a : assignment) ++s[a];
  return s;
}

std::size_t ClusterModel::predict(const Vector& raw_feature) const {
  const Vector f = feature_stats.normalize(raw_feature);
  Eigen::Index best = 0;
  (centroids.rowwise() - f.transpose()).rowwise().squaredNorm().minCoeff(&best);
  return static_cast<std::size_t>(best);
}

double inertia_of(const Matrix& x, const Matrix& c, const std::vector<std::size_t>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(a[i]))).squaredNorm();
  return s;
}

ClusterModel kmeans(const Matrix& points, std::size_t k, std::size_t max_iter, std::size_t n_init, Rng& rng) {
  require(k >= 2, "k-means needs k >= 2");
  require(static_cast<std::size_t>(points.rows()) >= k, "k-means needs at least k points");
  require(max_iter >= 1 && n_init >= 1, "max_iter and n_init must be positive");
  require(points.allFinite(), "k-means points must be finite");
  ClusterModel best;
  for (std::size_t run = 0; run < n_init; ++run) {
    ClusterModel m = lloyd(points, k, max_iter, rng);
    if (run == 0 || m.inertia < best.inertia) best = std::move(m);
  }
  return best;
}

Matrix transition_features(const data::Dataset& d) {
  const auto t = data::TransitionTable::from(d);
  Matrix f(t.states.rows(), t.states.cols() * 2 + t.actions.cols());
  f << t.states, t.actions, t.next_states;
  return f;
}

ClusterModel cluster_transitions(const data::Dataset& d, std::size_t k, std::size_t max_iter, std::size_t n_init,
                                 Rng& rng) {
  const Matrix raw = transition_features(d);
  require(raw.rows() >= 2, "clustering needs at least two transitions");
  data::StateStats stats;
  stats.mean = raw.colwise().mean().transpose();
  const Matrix centered = raw.rowwise() - stats.mean.transpose();
  stats.std = (centered.colwise().squaredNorm() / static_cast<double>(raw.rows())).cwiseSqrt().transpose();
  stats.std = stats.std.cwiseMax(1e-6);
  ClusterModel m = kmeans(stats.normalize_rows(raw), k, max_iter, n_init, rng);
  m.feature_stats = stats;
  return m;
}

data::Dataset cluster_to_expert(const ClusterModel& cm, const data::Dataset& d, std::size_t cluster_id) {
  require(cluster_id < cm.k, "unknown cluster id " + std::to_string(cluster_id));
  require(cm.assignment.size() == d.transition_count(), "cluster model does not match dataset");
  std::vector<data::Trajectory> out;
  std::size_t row = 0;
  for (const auto& traj : d.trajectories) {
    for (std::size_t t = 0; t < traj.length(); ++t, ++row) {
      if (cm.assignment[row] != cluster_id) continue;
      data::Trajectory single;
      single.observations = {traj.observations[t], traj.observations[t + 1]};
      single.actions = {traj.actions[t]};
      single.terminals = {traj.terminals[t]};
      out.push_back(std::move(single));
    }
  }
  require(!out.empty(), "cluster " + std::to_string(cluster_id) + " is empty");
  return data::Dataset::from_trajectories(std::move(out));
}

}  // namespace clue::skills
