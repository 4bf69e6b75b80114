#pragma once

#include <cstdint>
#include <memory>

#include "clue/cvae/cvae.hpp"
#include "clue/dataset/dataset.hpp"
#include "clue/envs/maze.hpp"
#include "clue/envs/rollout.hpp"
#include "clue/offline_rl/iql.hpp"
#include "clue/reward/reward.hpp"

namespace clue::pipeline {

using nn::Vector;

// Fixed stream ids so every stage draws from its own generator.
enum Stream : std::uint64_t {
  kStreamData = 1,
  kStreamCvaeInit = 2,
  kStreamCvaeTrain = 3,
  kStreamRelabel = 4,
  kStreamIqlInit = 5,
  kStreamIqlTrain = 6,
  kStreamEval = 7,
  kStreamCluster = 8,
  kStreamSubsample = 9,
  kStreamSkill = 100,  // + cluster id
};

struct RewardConfig {
  double temperature = 6.0;
  reward::SamplingMode mode = reward::SamplingMode::mean;
};

// mixed = rest followed by expert, or rest alone when the expert is excluded
// from the ELBO pool.
data::Dataset mixed_union(const data::Dataset& rest, const data::Dataset& expert, bool exclude_expert);

struct RewardModel {
  std::shared_ptr<cvae::CvaeModel> model;
  cvae::CvaeTrainReport report;
  Vector anchor;
};

// Trains a CVAE on `mixed` with calibration on `expert` and computes the
// expert anchor. On divergence the report is flagged and the anchor left empty.
RewardModel learn_reward_model(const data::Dataset& mixed, const data::Dataset& expert, const cvae::CvaeConfig& config,
                               std::uint64_t seed);

// Continues training a copy of `base` with calibration on `expert`.
RewardModel finetune_reward_model(const cvae::CvaeModel& base, const data::Dataset& mixed,
                                  const data::Dataset& expert, const cvae::CvaeConfig& config, std::uint64_t seed);

reward::RewardLabeler make_labeler(const RewardModel& rm, const RewardConfig& config);

data::Dataset relabel_dataset(const reward::RewardLabeler& labeler, const data::Dataset& d, std::uint64_t seed);

struct AgentRun {
  rl::IqlAgent agent;
  rl::TrainResult result;
};

// Trains IQL on `d`; when `maze` is given the curves carry periodic
// evaluations of the deterministic policy. Divergence is reported through
// result.diverged with the curves recorded so far.
AgentRun train_agent(const data::Dataset& d, const rl::IqlConfig& config, std::size_t steps, std::uint64_t seed,
                     const env::PointMaze* maze = nullptr, std::size_t eval_interval = 0,
                     std::size_t eval_episodes = 10);

env::PolicyFn deterministic_policy(const rl::IqlAgent& agent);

// Evaluates with seeds seed, seed+1, ... each for `episodes` episodes.
std::vector<env::EvalSummary> evaluate_seeds(const env::PointMaze& maze, const rl::IqlAgent& agent,
                                             std::uint64_t first_seed, std::size_t seeds, std::size_t episodes);

}  // namespace clue::pipeline
