#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "clue/dataset/dataset.hpp"
#include "clue/rng.hpp"

namespace clue::skills {

using nn::Matrix;
using nn::Vector;

struct ClusterModel {
  std::size_t k = 0;
  Matrix centroids;                    // k x d, in normalized feature space
  std::vector<std::size_t> assignment;  // one cluster id per point
  data::StateStats feature_stats;       // identity when clustering raw points
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after every Lloyd iteration
  std::size_t iterations = 0;
  bool converged = false;

  std::vector<std::size_t> cluster_sizes() const;
  std::size_t predict(const Vector& raw_feature) const;
};

// k-means++ seeding followed by Lloyd iterations until assignments stop
// changing or max_iter is reached. A cluster that empties is reseeded at the
// point farthest from its current centroid. With n_init > 1 the lowest-inertia
// run wins (earliest on ties).
ClusterModel kmeans(const Matrix& points, std::size_t k, std::size_t max_iter, std::size_t n_init, Rng& rng);

// Rows of concat(s, a, s') in transition order.
Matrix transition_features(const data::Dataset& d);

// z-scores transition features (std floored at 1e-6) and clusters them.
ClusterModel cluster_transitions(const data::Dataset& d, std::size_t k, std::size_t max_iter, std::size_t n_init,
                                 Rng& rng);

// The cluster's transitions as single-step trajectories without rewards.
// Throws invalid_argument for an empty or unknown cluster.
data::Dataset cluster_to_expert(const ClusterModel& cm, const data::Dataset& d, std::size_t cluster_id);

double inertia_of(const Matrix& points, const Matrix& centroids, const std::vector<std::size_t>& assignment);

}  // namespace clue::skills
