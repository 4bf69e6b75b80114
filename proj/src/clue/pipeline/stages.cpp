#include "clue/pipeline/stages.hpp"

#include <algorithm>

#include "clue/error.hpp"

namespace clue::pipeline {

data::Dataset mixed_union(const data::Dataset& rest, const data::Dataset& expert, bool exclude_expert) {
  std::vector<data::Trajectory> all = rest.trajectories;
  if (!exclude_expert) all.insert(all.end(), expert.trajectories.begin(), expert.trajectories.end());
  // Reward presence must be uniform; the CVAE ignores rewards anyway.
  const bool labeled = std::all_of(all.begin(), all.end(), [](const auto& t) { return t.rewards.has_value(); });
  if (!labeled)
    for (auto& t : all) t.rewards.reset();
  return data::Dataset::from_trajectories(std::move(all));
}

RewardModel learn_reward_model(const data::Dataset& mixed, const data::Dataset& expert, const cvae::CvaeConfig& config,
                               std::uint64_t seed) {
  Rng init(seed, kStreamCvaeInit);
  Rng train(seed, kStreamCvaeTrain);
  RewardModel rm;
  rm.model = std::make_shared<cvae::CvaeModel>(cvae::CvaeModel::create(mixed.state_dim, mixed.action_dim, config, init));
  rm.report = cvae::train(*rm.model, mixed, expert, config, train);
  if (!rm.report.diverged) rm.anchor = reward::expert_anchor(*rm.model, expert);
  return rm;
}

RewardModel finetune_reward_model(const cvae::CvaeModel& base, const data::Dataset& mixed, const data::Dataset& expert,
                                  const cvae::CvaeConfig& config, std::uint64_t seed) {
  Rng train(seed, kStreamCvaeTrain);
  RewardModel rm;
  rm.model = std::make_shared<cvae::CvaeModel>(base);
  rm.report = cvae::train(*rm.model, mixed, expert, config, train, false);
  if (!rm.report.diverged) rm.anchor = reward::expert_anchor(*rm.model, expert);
  return rm;
}

reward::RewardLabeler make_labeler(const RewardModel& rm, const RewardConfig& config) {
  return reward::RewardLabeler(rm.model, rm.anchor, config.temperature, config.mode);
}

data::Dataset relabel_dataset(const reward::RewardLabeler& labeler, const data::Dataset& d, std::uint64_t seed) {
  Rng rng(seed, kStreamRelabel);
  return reward::relabel(labeler, d, &rng);
}

env::PolicyFn deterministic_policy(const rl::IqlAgent& agent) {
  return [&agent](const Vector& s, Rng&) { return rl::act(agent, s, true); };
}

AgentRun train_agent(const data::Dataset& d, const rl::IqlConfig& config, std::size_t steps, std::uint64_t seed,
                     const env::PointMaze* maze, std::size_t eval_interval, std::size_t eval_episodes) {
  Rng init(seed, kStreamIqlInit);
  Rng train(seed, kStreamIqlTrain);
  AgentRun run{rl::IqlAgent::create(d.state_dim, d.action_dim, config, init), {}};
  rl::TrainOptions options;
  options.eval_interval = eval_interval;
  if (maze != nullptr) {
    options.evaluator = [maze, seed, eval_episodes](const rl::IqlAgent& agent) {
      Rng eval(seed, kStreamEval);
      const auto s = env::evaluate(*maze, deterministic_policy(agent), eval_episodes, eval);
      return rl::EvalScore{s.mean_return, s.success_rate};
    };
  }
  run.result = rl::train(run.agent, d, steps, train, options);
  return run;
}

std::vector<env::EvalSummary> evaluate_seeds(const env::PointMaze& maze, const rl::IqlAgent& agent,
                                             std::uint64_t first_seed, std::size_t seeds, std::size_t episodes) {
  std::vector<env::EvalSummary> out;
  for (std::size_t i = 0; i < seeds; ++i) {
    Rng rng(first_seed + i, kStreamEval);
    out.push_back(env::evaluate(maze, deterministic_policy(agent), episodes, rng));
  }
  return out;
}

}  // namespace clue::pipeline
