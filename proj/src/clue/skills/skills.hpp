#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clue/pipeline/stages.hpp"
#include "clue/skills/kmeans.hpp"

namespace clue::skills {

struct SkillsConfig {
  std::size_t k = 8;
  std::size_t max_iter = 300;
  std::size_t n_init = 1;
  double min_cluster_fraction = 0.005;
  // Train one CVAE per cluster from scratch instead of fine-tuning a shared,
  // uncalibrated one.
  bool per_cluster_from_scratch = false;
  std::size_t finetune_iterations = 2000;
  cvae::CvaeConfig cvae;
  pipeline::RewardConfig reward;
  rl::IqlConfig iql;
  std::size_t iql_steps = 5000;
  std::size_t eval_episodes = 10;
  std::size_t workers = 1;
};

struct SkillEntry {
  std::size_t cluster_id = 0;
  std::size_t cluster_size = 0;
  bool failed = false;
  std::string error;
  std::optional<pipeline::RewardModel> reward_model;
  std::optional<rl::IqlAgent> agent;
  std::vector<rl::CurveRow> curves;
  std::vector<double> rewards;  // relabeled reward per transition of the input
  env::EvalSummary eval;
  std::vector<data::Trajectory> rollouts;
  Vector mean_final_state;
  int dominant_quadrant = -1;
};

struct SkillLibrary {
  ClusterModel clusters;
  std::vector<SkillEntry> skills;
  std::vector<std::size_t> dropped_clusters;
  std::optional<cvae::CvaeModel> shared_model;

  std::size_t failures() const;
  std::size_t distinct_quadrants() const;
  // Pairwise distances between the skills' mean final states.
  std::vector<std::vector<double>> diversity() const;
};

// Clusters the reward-free dataset, treats each retained cluster as expert
// data, learns a calibrated reward and an IQL policy per cluster. With k = 1
// the whole dataset is the expert and the run matches the imitation pipeline
// with the expert excluded from the ELBO pool. `maze` enables evaluation
// rollouts. Per-cluster failures are recorded and do not stop the others.
SkillLibrary learn_skills(const data::Dataset& d, const SkillsConfig& config, std::uint64_t seed,
                          const env::PointMaze* maze = nullptr);

}  // namespace clue::skills
