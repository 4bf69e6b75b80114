#include "clue/skills/skills.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include "clue/error.hpp"

namespace clue::skills {

namespace {

ClusterModel single_cluster(const data::Dataset& d) {
  ClusterModel m;
  m.k = 1;
  const Matrix f = transition_features(d);
  m.feature_stats = data::StateStats::identity(static_cast<std::size_t>(f.cols()));
  m.centroids = f.colwise().mean();
  m.assignment.assign(static_cast<std::size_t>(f.rows()), 0);
  m.inertia = (f.rowwise() - m.centroids.row(0)).squaredNorm();
  m.converged = true;
  return m;
}

void run_skill(SkillEntry& entry, const data::Dataset& d, const data::Dataset& expert, const SkillsConfig& config,
               std::uint64_t seed, const cvae::CvaeModel* shared, const env::PointMaze* maze) {
  // k = 1 shares the imitation pipeline's seed so both paths coincide.
  const std::uint64_t skill_seed = config.k == 1 ? seed : Rng(seed, pipeline::kStreamSkill + entry.cluster_id).engine()();
  pipeline::RewardModel rm;
  if (shared != nullptr) {
    auto ft = config.cvae;
    ft.iterations = config.finetune_iterations;
    rm = pipeline::finetune_reward_model(*shared, d, expert, ft, skill_seed);
  } else {
    rm = pipeline::learn_reward_model(d, expert, config.cvae, skill_seed);
  }
  if (rm.report.diverged) fail(ErrorCode::training_diverged, "CVAE diverged: " + rm.report.message);
  const auto labeler = pipeline::make_labeler(rm, config.reward);
  const data::Dataset relabeled = pipeline::relabel_dataset(labeler, d, skill_seed);
  for (const auto& t : relabeled.trajectories) entry.rewards.insert(entry.rewards.end(), t.rewards->begin(), t.rewards->end());
  entry.reward_model = std::move(rm);

  auto run = pipeline::train_agent(relabeled, config.iql, config.iql_steps, skill_seed);
  entry.curves = run.result.curves;
  if (run.result.diverged) fail(ErrorCode::training_diverged, "IQL diverged: " + run.result.message);
  entry.agent = std::move(run.agent);

  if (maze != nullptr) {
    Rng eval(skill_seed, pipeline::kStreamEval);
    const auto policy = pipeline::deterministic_policy(*entry.agent);
    for (std::size_t e = 0; e < config.eval_episodes; ++e) entry.rollouts.push_back(env::rollout(*maze, policy, eval));
    entry.eval.episodes.clear();
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(d.state_dim));
    std::vector<int> votes(4, 0);
    for (const auto& t : entry.rollouts) {
      env::EpisodeRecord r;
      r.total_return = t.total_return().value_or(0.0);
      r.success = t.success.value_or(false);
      r.length = t.length();
      r.final_state = t.observations.back();
      entry.eval.mean_return += r.total_return;
      entry.eval.success_rate += r.success ? 1.0 : 0.0;
      sum += r.final_state;
      ++votes[static_cast<std::size_t>(maze->quadrant(r.final_state))];
      entry.eval.episodes.push_back(std::move(r));
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, entry.rollouts.size()));
    entry.eval.mean_return /= n;
    entry.eval.success_rate /= n;
    entry.mean_final_state = sum / n;
    entry.dominant_quadrant =
        static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
}

}  // namespace

std::size_t SkillLibrary::failures() const {
  return static_cast<std::size_t>(std::count_if(skills.begin(), skills.end(), [](const auto& s) { return s.failed; }));
}

std::size_t SkillLibrary::distinct_quadrants() const {
  std::set<int> q;
  for (const auto& s : skills)
    if (!s.failed && s.dominant_quadrant >= 0) q.insert(s.dominant_quadrant);
  return q.size();
}

std::vector<std::vector<double>> SkillLibrary::diversity() const {
  std::vector<std::vector<double>> out(skills.size(), std::vector<double>(skills.size(), 0.0));
  for (std::size_t i = 0; i < skills.size(); ++i)
    for (std::size_t j = 0; j < skills.size(); ++j)
      if (skills[i].mean_final_state.size() > 0 && skills[j].mean_final_state.size() > 0)
        out[i][j] = (skills[i].mean_final_state - skills[j].mean_final_state).norm();
  return out;
}

SkillLibrary learn_skills(const data::Dataset& d, const SkillsConfig& config, std::uint64_t seed,
                          const env::PointMaze* maze) {
  require(config.k >= 1, "k must be at least 1");
  require(config.workers >= 1, "at least one worker is required");
  d.validate();
  // Skill discovery works on reward-free data.
  const data::Dataset reward_free = data::strip_rewards(d);

  SkillLibrary lib;
  if (config.k == 1) {
    lib.clusters = single_cluster(reward_free);
  } else {
    Rng rng(seed, pipeline::kStreamCluster);
    lib.clusters = cluster_transitions(reward_free, config.k, config.max_iter, config.n_init, rng);
  }

  const auto sizes = lib.clusters.cluster_sizes();
  const double total = static_cast<double>(reward_free.transition_count());
  for (std::size_t c = 0; c < lib.clusters.k; ++c) {
    if (sizes[c] == 0) {
      warn("cluster " + std::to_string(c) + " is empty; skipped");
      lib.dropped_clusters.push_back(c);
    } else if (config.k > 1 && static_cast<double>(sizes[c]) < config.min_cluster_fraction * total) {
      lib.dropped_clusters.push_back(c);
    } else {
      SkillEntry e;
      e.cluster_id = c;
      e.cluster_size = sizes[c];
      lib.skills.push_back(std::move(e));
    }
  }

  const bool shared = !config.per_cluster_from_scratch && config.k > 1;
  if (shared) {
    auto base = config.cvae;
    base.calibration_weight = 0.0;
    const auto rm = pipeline::learn_reward_model(reward_free, reward_free, base, seed);
    if (rm.report.diverged) fail(ErrorCode::training_diverged, "shared CVAE diverged: " + rm.report.message);
    lib.shared_model = *rm.model;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < lib.skills.size(); i = next++) {
      SkillEntry& entry = lib.skills[i];
      try {
        const data::Dataset expert = cluster_to_expert(lib.clusters, reward_free, entry.cluster_id);
        run_skill(entry, reward_free, expert, config, seed, shared ? &*lib.shared_model : nullptr, maze);
      } catch (const std::exception& ex) {
        entry.failed = true;
        entry.error = ex.what();
      }
    }
  };
  const std::size_t workers = std::min(config.workers, std::max<std::size_t>(1, lib.skills.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return lib;
}

}  // namespace clue::skills
