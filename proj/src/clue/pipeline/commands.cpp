#include "clue/pipeline/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "clue/envs/policies.hpp"
#include "clue/envs/rollout.hpp"
#include "clue/error.hpp"
#include "clue/format.hpp"
#include "clue/skills/skills.hpp"

namespace fs = std::filesystem;

namespace clue::pipeline {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::io_error, "write failed for " + path.string());
}

void prepare_output(const RunConfig& c) {
  if (c.output_dir.empty()) fail(ErrorCode::validation_error, "output_dir is required");
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec || !fs::is_directory(c.output_dir))
    fail(ErrorCode::io_error, "cannot create output directory " + c.output_dir.string());
  write_text(c.output_dir / "config.json", c.to_json().dump(2) + "\n");
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) fail(ErrorCode::validation_error, std::string(what) + " is required");
  if (!fs::is_regular_file(path)) fail(ErrorCode::validation_error, std::string(what) + " not found: " + path);
}

env::PointMaze load_maze(const RunConfig& c) {
  require_file(c.env.layout, "env.layout");
  auto maze = env::PointMaze::load(c.env.layout);
  maze.set_reward_kind(c.env.reward == "dense" ? env::RewardKind::dense : env::RewardKind::sparse);
  return maze;
}

std::optional<env::PointMaze> optional_maze(const RunConfig& c) {
  if (c.env.layout.empty()) return std::nullopt;
  return load_maze(c);
}

data::Dataset load_dataset(const std::string& path, const char* what) {
  require_file(path, what);
  return data::load(path);
}

std::string join_doubles(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt_double(v[i]);
  return s;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

std::string success_line(const std::string& name, const data::Dataset& d) {
  std::size_t wins = 0;
  for (const auto& t : d.trajectories) wins += data::is_success(t) ? 1 : 0;
  const double rate = d.trajectories.empty() ? 0.0 : static_cast<double>(wins) / d.trajectories.size();
  return name + ": " + std::to_string(d.trajectories.size()) + " episodes, " + std::to_string(d.transition_count()) +
         " transitions, success rate " + fmt_double(rate, 4) + "\n";
}

// Data feeding the reward model: the ELBO pool, the calibration set and the
// dataset that gets relabeled.
struct RewardInputs {
  data::Dataset mixed;
  data::Dataset expert;
  data::Dataset target;
};

data::Dataset take_first(const data::Dataset& d, std::size_t k) {
  if (d.trajectories.empty()) fail(ErrorCode::no_expert_found, "expert dataset is empty");
  if (d.trajectories.size() < k)
    warn("expert file holds " + std::to_string(d.trajectories.size()) + " trajectories, fewer than expert_k");
  std::vector<data::Trajectory> head(d.trajectories.begin(),
                                     d.trajectories.begin() + std::min(k, d.trajectories.size()));
  return data::Dataset::from_trajectories(std::move(head));
}

RewardInputs reward_inputs(const RunConfig& c, const data::Dataset& loaded, double fraction, std::uint64_t seed) {
  data::Dataset d = loaded;
  if (fraction < 1.0) {
    Rng rng(seed, kStreamSubsample);
    d = data::subsample(d, fraction, rng);
  }
  RewardInputs in;
  switch (c.pipeline) {
    case PipelineKind::sparse: {
      auto split = data::filter_expert_by_success(d, c.data.expert_k, true);
      in.expert = std::move(split.expert);
      in.mixed = mixed_union(split.rest, in.expert, c.data.exclude_expert);
      in.target = std::move(d);
      break;
    }
    case PipelineKind::il: {
      if (c.data.expert.empty()) fail(ErrorCode::no_expert_found, "the imitation pipeline needs data.expert");
      in.expert = take_first(load_dataset(c.data.expert, "data.expert"), c.data.expert_k);
      if (in.expert.state_dim != d.state_dim || in.expert.action_dim != d.action_dim)
        fail(ErrorCode::validation_error, "expert and dataset dimensions differ");
      in.mixed = mixed_union(d, in.expert, c.data.exclude_expert);
      in.target = std::move(d);
      break;
    }
    case PipelineKind::skills:
      fail(ErrorCode::validation_error, "this command needs pipeline sparse or il");
  }
  return in;
}

std::string cvae_curves_csv(const cvae::CvaeTrainReport& r) {
  std::string s = "iteration,elbo,kl,reconstruction,calibration\n";
  for (std::size_t i = 0; i < r.elbo.size(); ++i)
    s += std::to_string(i + 1) + "," + fmt_double(r.elbo[i]) + "," + fmt_double(r.kl[i]) + "," +
         fmt_double(r.reconstruction[i]) + "," + fmt_double(r.calibration[i]) + "\n";
  return s;
}

Json anchor_json(const Vector& anchor, const RewardConfig& rc) {
  Json j;
  j["anchor"] = std::vector<double>(anchor.data(), anchor.data() + anchor.size());
  j["c"] = rc.temperature;
  j["sampling_mode"] = reward::to_string(rc.mode);
  return j;
}

void write_reward_model(const fs::path& dir, const RewardModel& rm, const RewardConfig& rc) {
  cvae::save_model(*rm.model, dir / "cvae.ckpt", rc.temperature);
  write_text(dir / "anchor.json", anchor_json(rm.anchor, rc).dump(2) + "\n");
  write_text(dir / "cvae_curves.csv", cvae_curves_csv(rm.report));
}

std::vector<double> flat_rewards(const data::Dataset& d, bool original) {
  std::vector<double> out;
  for (const auto& t : d.trajectories) {
    const auto& src = original ? t.original_rewards : t.rewards;
    if (!src) return {};
    out.insert(out.end(), src->begin(), src->end());
  }
  return out;
}

Json correlation_report(const data::Dataset& relabeled, const reward::RewardLabeler& labeler,
                        const data::Dataset& expert) {
  const auto r = flat_rewards(relabeled, false);
  const auto truth = flat_rewards(relabeled, true);
  const auto et = data::TransitionTable::from(expert);
  const Vector er = labeler.rewards(et.states, et.actions);
  Json j;
  j["transitions"] = r.size();
  j["mean_reward"] = mean_of(r);
  j["expert_mean_reward"] = er.size() ? er.mean() : 0.0;
  const bool comparable = !truth.empty() && truth.size() == r.size() && std_of(truth) > 0.0 && std_of(r) > 0.0;
  if (comparable) {
    j["pearson"] = reward::pearson(r, truth);
    j["spearman"] = reward::spearman(r, truth);
  } else {
    j["pearson"] = nullptr;
    j["spearman"] = nullptr;
  }
  // Trajectory level: relabeled return against task success.
  std::vector<double> pos, neg;
  for (const auto& t : relabeled.trajectories) {
    std::optional<bool> won = t.success;
    if (!won && t.original_rewards)
      won = std::any_of(t.original_rewards->begin(), t.original_rewards->end(), [](double x) { return x > 0.0; });
    if (!won) continue;
    (*won ? pos : neg).push_back(t.total_return().value_or(0.0));
  }
  if (!pos.empty() && !neg.empty()) j["success_auc"] = reward::roc_auc(pos, neg);
  else j["success_auc"] = nullptr;
  return j;
}

RewardModel reward_model_for(const RunConfig& c, const RewardInputs& in, std::uint64_t seed, bool& trained) {
  trained = c.cvae_checkpoint.empty();
  if (trained) return learn_reward_model(in.mixed, in.expert, c.cvae, seed);
  require_file(c.cvae_checkpoint, "cvae.checkpoint");
  RewardModel rm;
  rm.model = std::make_shared<cvae::CvaeModel>(cvae::load_model(c.cvae_checkpoint));
  if (rm.model->state_dim != in.expert.state_dim || rm.model->action_dim != in.expert.action_dim)
    fail(ErrorCode::validation_error, "checkpoint dimensions do not match the data");
  rm.anchor = reward::expert_anchor(*rm.model, in.expert);
  return rm;
}

std::string eval_csv(const env::EvalSummary& s) {
  std::string out = "episode,return,success,length,final_x,final_y\n";
  for (std::size_t i = 0; i < s.episodes.size(); ++i) {
    const auto& e = s.episodes[i];
    out += std::to_string(i) + "," + fmt_double(e.total_return) + "," + (e.success ? "1" : "0") + "," +
           std::to_string(e.length) + "," + fmt_double(e.final_state[0]) + "," + fmt_double(e.final_state[1]) + "\n";
  }
  return out;
}

}  // namespace

std::string reward_histogram_csv(const std::vector<double>& rewards, std::size_t bins) {
  std::vector<std::size_t> counts(bins, 0);
  for (double r : rewards) {
    const double x = std::clamp(r, 0.0, 1.0);
    counts[std::min(bins - 1, static_cast<std::size_t>(x * static_cast<double>(bins)))] += 1;
  }
  std::string s = "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < bins; ++b)
    s += fmt_double(static_cast<double>(b) / bins) + "," + fmt_double(static_cast<double>(b + 1) / bins) + "," +
         std::to_string(counts[b]) + "\n";
  return s;
}

std::string scores_csv(std::uint64_t first_seed, const std::vector<env::EvalSummary>& scores) {
  std::string s = "seed,mean_return,success_rate\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
    s += std::to_string(first_seed + i) + "," + fmt_double(scores[i].mean_return) + "," +
         fmt_double(scores[i].success_rate) + "\n";
  return s;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gen-data", "train-cvae", "relabel", "train", "eval", "skills", "sweep"};
  return names;
}

CommandResult run_command(const std::string& name, const RunConfig& config) {
  if (name == "gen-data") return cmd_gen_data(config);
  if (name == "train-cvae") return cmd_train_cvae(config);
  if (name == "relabel") return cmd_relabel(config);
  if (name == "train") return cmd_train(config);
  if (name == "eval") return cmd_eval(config);
  if (name == "skills") return cmd_skills(config);
  if (name == "sweep") return cmd_sweep(config);
  fail(ErrorCode::invalid_argument, "unknown command '" + name + "'");
}

CommandResult cmd_gen_data(const RunConfig& c) {
  if (c.gen.episodes == 0) fail(ErrorCode::invalid_argument, "gen.episodes must be positive");
  const auto maze = load_maze(c);
  const auto mixture = env::parse_mixture(c.gen.mix);
  prepare_output(c);
  CommandResult res;
  Rng rng(c.seed, kStreamData);
  const auto d = env::generate_dataset(maze, mixture, c.gen.episodes, rng);
  data::save(d, c.output_dir / "dataset.jsonl");
  res.summary += success_line("dataset.jsonl", d);
  res.report["dataset"] = (c.output_dir / "dataset.jsonl").string();
  if (c.gen.expert_episodes > 0) {
    Rng erng = rng.derive(1);
    const auto e = env::generate_dataset(maze, env::parse_mixture(c.gen.expert_mix), c.gen.expert_episodes, erng);
    data::save(e, c.output_dir / "expert.jsonl");
    res.summary += success_line("expert.jsonl", e);
    res.report["expert"] = (c.output_dir / "expert.jsonl").string();
  }
  return res;
}

CommandResult cmd_train_cvae(const RunConfig& c) {
  const auto d = load_dataset(c.data.dataset, "data.dataset");
  const auto in = reward_inputs(c, d, c.data.fraction, c.seed);
  prepare_output(c);
  const auto rm = learn_reward_model(in.mixed, in.expert, c.cvae, c.seed);
  write_text(c.output_dir / "cvae_curves.csv", cvae_curves_csv(rm.report));
  if (rm.report.diverged) fail(ErrorCode::training_diverged, "CVAE training diverged: " + rm.report.message);
  write_reward_model(c.output_dir, rm, c.reward);
  CommandResult res;
  res.summary = "cvae: " + std::to_string(rm.report.iterations()) + " iterations, final elbo " +
                fmt_double(rm.report.elbo.back(), 6) + ", expert spread " + fmt_double(rm.report.expert_spread, 6) +
                "\nanchor: " + join_doubles(rm.anchor) + "\n";
  res.report["expert_spread"] = rm.report.expert_spread;
  res.report["checkpoint"] = (c.output_dir / "cvae.ckpt").string();
  return res;
}

CommandResult cmd_relabel(const RunConfig& c) {
  const auto d = load_dataset(c.data.dataset, "data.dataset");
  const auto in = reward_inputs(c, d, c.data.fraction, c.seed);
  prepare_output(c);
  bool trained = false;
  const auto rm = reward_model_for(c, in, c.seed, trained);
  if (trained) {
    write_text(c.output_dir / "cvae_curves.csv", cvae_curves_csv(rm.report));
    if (rm.report.diverged) fail(ErrorCode::training_diverged, "CVAE training diverged: " + rm.report.message);
    write_reward_model(c.output_dir, rm, c.reward);
  }
  const auto labeler = make_labeler(rm, c.reward);
  const auto relabeled = relabel_dataset(labeler, in.target, c.seed);
  data::save(relabeled, c.output_dir / "relabeled.jsonl");
  const auto rewards = flat_rewards(relabeled, false);
  write_text(c.output_dir / "reward_hist.csv", reward_histogram_csv(rewards));
  const Json corr = correlation_report(relabeled, labeler, in.expert);
  write_text(c.output_dir / "correlation.json", corr.dump(2) + "\n");
  CommandResult res;
  res.summary = "relabeled " + std::to_string(rewards.size()) + " transitions, mean reward " +
                fmt_double(corr["mean_reward"].get<double>(), 6) + ", expert mean reward " +
                fmt_double(corr["expert_mean_reward"].get<double>(), 6) + "\n";
  if (!corr["pearson"].is_null())
    res.summary += "correlation with original rewards: pearson " + fmt_double(corr["pearson"].get<double>(), 6) +
                   ", spearman " + fmt_double(corr["spearman"].get<double>(), 6) + "\n";
  res.report = corr;
  return res;
}

CommandResult cmd_train(const RunConfig& c) {
  auto d = load_dataset(c.data.dataset, "data.dataset");
  if (!d.reward_labeled()) fail(ErrorCode::missing_rewards, "training needs a reward-labeled dataset");
  if (c.data.fraction < 1.0) {
    Rng rng(c.seed, kStreamSubsample);
    d = data::subsample(d, c.data.fraction, rng);
  }
  const auto maze = optional_maze(c);
  prepare_output(c);
  auto run = train_agent(d, c.iql, c.iql_steps, c.seed, maze ? &*maze : nullptr, c.eval_interval, c.eval.episodes);
  write_text(c.output_dir / "curves.csv", rl::curves_csv(run.result.curves));
  if (run.result.diverged) fail(ErrorCode::training_diverged, "IQL training diverged: " + run.result.message);
  rl::save_agent(run.agent, c.output_dir / "agent.ckpt");
  CommandResult res;
  const auto& last = run.result.curves.back();
  res.summary = "iql: " + std::to_string(c.iql_steps) + " steps, v_loss " + fmt_double(last.v_loss, 6) + ", q_loss " +
                fmt_double(last.q_loss, 6) + ", pi_loss " + fmt_double(last.pi_loss, 6) + "\n";
  if (maze)
    res.summary += "final eval: return " + fmt_double(last.eval_return, 6) + ", success rate " +
                   fmt_double(last.eval_success_rate, 4) + "\n";
  res.report["checkpoint"] = (c.output_dir / "agent.ckpt").string();
  return res;
}

CommandResult cmd_eval(const RunConfig& c) {
  require_file(c.agent_checkpoint, "iql.agent");
  const auto maze = load_maze(c);
  const auto agent = rl::load_agent(c.agent_checkpoint);
  if (agent.state_dim != 2 || agent.action_dim != 2) fail(ErrorCode::validation_error, "agent does not fit the maze");
  prepare_output(c);
  const auto scores = evaluate_seeds(maze, agent, c.seed, c.eval.seeds, c.eval.episodes);
  write_text(c.output_dir / "scores.csv", scores_csv(c.seed, scores));
  std::vector<double> returns, rates;
  for (const auto& s : scores) {
    returns.push_back(s.mean_return);
    rates.push_back(s.success_rate);
  }
  std::string summary = "metric,mean,std\n";
  summary += "mean_return," + fmt_double(mean_of(returns)) + "," + fmt_double(std_of(returns)) + "\n";
  summary += "success_rate," + fmt_double(mean_of(rates)) + "," + fmt_double(std_of(rates)) + "\n";
  write_text(c.output_dir / "scores_summary.csv", summary);
  CommandResult res;
  res.summary = "return " + fmt_double(mean_of(returns), 6) + " +- " + fmt_double(std_of(returns), 6) +
                ", success rate " + fmt_double(mean_of(rates), 4) + " +- " + fmt_double(std_of(rates), 4) + "\n";
  res.report["mean_return"] = mean_of(returns);
  res.report["std_return"] = std_of(returns);
  res.report["success_rate"] = mean_of(rates);
  res.report["std_success_rate"] = std_of(rates);
  return res;
}

CommandResult cmd_skills(const RunConfig& c) {
  const auto d = load_dataset(c.data.dataset, "data.dataset");
  const auto maze = optional_maze(c);
  prepare_output(c);
  const auto lib = skills::learn_skills(d, c.skills, c.seed, maze ? &*maze : nullptr);

  const fs::path root = c.output_dir / "skills";
  fs::create_directories(root);
  if (lib.shared_model) cvae::save_model(*lib.shared_model, root / "shared_cvae.ckpt", c.reward.temperature);

  Json clusters;
  clusters["k"] = lib.clusters.k;
  clusters["sizes"] = lib.clusters.cluster_sizes();
  clusters["dropped"] = lib.dropped_clusters;
  clusters["inertia"] = lib.clusters.inertia;
  clusters["iterations"] = lib.clusters.iterations;
  clusters["converged"] = lib.clusters.converged;
  Json centroids = Json::array();
  for (Eigen::Index r = 0; r < lib.clusters.centroids.rows(); ++r) {
    const Vector row = lib.clusters.centroids.row(r).transpose();
    centroids.push_back(std::vector<double>(row.data(), row.data() + row.size()));
  }
  clusters["centroids"] = centroids;
  const auto& fs_stats = lib.clusters.feature_stats;
  clusters["feature_mean"] = std::vector<double>(fs_stats.mean.data(), fs_stats.mean.data() + fs_stats.mean.size());
  clusters["feature_std"] = std::vector<double>(fs_stats.std.data(), fs_stats.std.data() + fs_stats.std.size());
  clusters["skills"] = Json::array();
  std::string summary;
  for (const auto& s : lib.skills) {
    const fs::path dir = root / std::to_string(s.cluster_id);
    fs::create_directories(dir);
    Json entry;
    entry["id"] = s.cluster_id;
    entry["size"] = s.cluster_size;
    entry["failed"] = s.failed;
    if (s.failed) {
      entry["error"] = s.error;
      summary += "skill " + std::to_string(s.cluster_id) + ": failed: " + s.error + "\n";
    } else {
      write_reward_model(dir, *s.reward_model, c.reward);
      rl::save_agent(*s.agent, dir / "agent.ckpt");
      write_text(dir / "curves.csv", rl::curves_csv(s.curves));
      if (maze) {
        write_text(dir / "eval.csv", eval_csv(s.eval));
        data::save(data::Dataset::from_trajectories(s.rollouts), dir / "rollouts.jsonl");
        entry["mean_return"] = s.eval.mean_return;
        entry["success_rate"] = s.eval.success_rate;
        entry["mean_final_state"] = std::vector<double>(s.mean_final_state.data(),
                                                        s.mean_final_state.data() + s.mean_final_state.size());
        entry["dominant_quadrant"] = s.dominant_quadrant;
      }
      summary += "skill " + std::to_string(s.cluster_id) + ": " + std::to_string(s.cluster_size) + " transitions";
      if (maze)
        summary += ", final state " + join_doubles(s.mean_final_state) + ", quadrant " +
                   std::to_string(s.dominant_quadrant);
      summary += "\n";
    }
    clusters["skills"].push_back(entry);
  }
  write_text(c.output_dir / "clusters.json", clusters.dump(2) + "\n");

  if (maze) {
    const auto dist = lib.diversity();
    std::string csv = "skill_a,skill_b,distance\n";
    for (std::size_t i = 0; i < lib.skills.size(); ++i)
      for (std::size_t j = i + 1; j < lib.skills.size(); ++j) {
        if (lib.skills[i].failed || lib.skills[j].failed) continue;
        csv += std::to_string(lib.skills[i].cluster_id) + "," + std::to_string(lib.skills[j].cluster_id) + "," +
               fmt_double(dist[i][j]) + "\n";
      }
    write_text(c.output_dir / "diversity.csv", csv);
    summary += "distinct final-state quadrants: " + std::to_string(lib.distinct_quadrants()) + "\n";
  }

  CommandResult res;
  res.summary = summary;
  res.report = clusters;
  res.report["failures"] = lib.failures();
  if (maze) res.report["distinct_quadrants"] = lib.distinct_quadrants();
  if (lib.failures() > 0)
    fail(ErrorCode::partial_failure,
         std::to_string(lib.failures()) + " of " + std::to_string(lib.skills.size()) + " skills failed");
  return res;
}

std::vector<SweepRow> sweep_rows(const RunConfig& c) {
  if (c.pipeline == PipelineKind::skills) fail(ErrorCode::validation_error, "sweep needs pipeline sparse or il");
  const auto maze = load_maze(c);
  const auto seeds = c.sweep.seeds.empty() ? std::vector<std::uint64_t>{c.seed} : c.sweep.seeds;
  const auto fractions = c.sweep.fractions.empty() ? std::vector<double>{c.data.fraction} : c.sweep.fractions;
  const auto lambdas =
      c.sweep.lambdas.empty() ? std::vector<double>{c.cvae.calibration_weight} : c.sweep.lambdas;
  const auto temps = c.sweep.temperatures.empty() ? std::vector<double>{c.reward.temperature} : c.sweep.temperatures;
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) fail(ErrorCode::validation_error, "sweep fractions must lie in (0, 1]");
  for (double l : lambdas)
    if (l < 0.0) fail(ErrorCode::validation_error, "sweep lambdas must be non-negative");
  for (double t : temps)
    if (!(t > 0.0)) fail(ErrorCode::validation_error, "sweep temperatures must be positive");

  std::optional<data::Dataset> fixed;
  if (!c.data.dataset.empty()) fixed = load_dataset(c.data.dataset, "data.dataset");
  else if (c.gen.episodes == 0) fail(ErrorCode::invalid_argument, "gen.episodes must be positive");

  auto score = [&](const rl::IqlAgent& agent, std::uint64_t seed, SweepRow& row) {
    const auto s = evaluate_seeds(maze, agent, seed, c.eval.seeds, c.eval.episodes);
    std::vector<double> rets, rates;
    for (const auto& e : s) {
      rets.push_back(e.mean_return);
      rates.push_back(e.success_rate);
    }
    row.mean_return = mean_of(rets);
    row.success_rate = mean_of(rates);
  };

  std::vector<SweepRow> rows;
  for (const auto seed : seeds) {
    data::Dataset d;
    if (fixed) {
      d = *fixed;
    } else {
      Rng rng(seed, kStreamData);
      d = env::generate_dataset(maze, env::parse_mixture(c.gen.mix), c.gen.episodes, rng);
    }
    for (const double f : fractions) {
      const auto in = reward_inputs(c, d, f, seed);
      if (c.sweep.include_sparse_baseline && c.pipeline == PipelineKind::sparse) {
        SweepRow row{seed, "sparse", f, 0.0, 0.0, 0.0, 0.0, 0.0, false};
        const auto run = train_agent(in.target, c.iql, c.iql_steps, seed);
        row.diverged = run.result.diverged;
        if (!row.diverged) score(run.agent, seed, row);
        rows.push_back(row);
      }
      for (const double lambda : lambdas) {
        auto cc = c.cvae;
        cc.calibration_weight = lambda;
        const auto rm = learn_reward_model(in.mixed, in.expert, cc, seed);
        for (const double t : temps) {
          SweepRow row{seed, "clue", f, lambda, t, rm.report.expert_spread, 0.0, 0.0, rm.report.diverged};
          if (!row.diverged) {
            const auto labeler = make_labeler(rm, RewardConfig{t, c.reward.mode});
            const auto relabeled = relabel_dataset(labeler, in.target, seed);
            const auto run = train_agent(relabeled, c.iql, c.iql_steps, seed);
            row.diverged = run.result.diverged;
            if (!row.diverged) score(run.agent, seed, row);
          }
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "seed,variant,fraction,lambda,c,expert_spread,mean_return,success_rate,diverged\n";
  for (const auto& r : rows)
    s += std::to_string(r.seed) + "," + r.variant + "," + fmt_double(r.fraction) + "," + fmt_double(r.lambda) + "," +
         fmt_double(r.temperature) + "," + fmt_double(r.expert_spread) + "," + fmt_double(r.mean_return) + "," +
         fmt_double(r.success_rate) + "," + (r.diverged ? "1" : "0") + "\n";
  return s;
}

CommandResult cmd_sweep(const RunConfig& c) {
  load_maze(c);
  prepare_output(c);
  const auto rows = sweep_rows(c);
  write_text(c.output_dir / "sweep.csv", sweep_csv(rows));

  // Aggregate over seeds per grid point, keeping first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    const std::string key = r.variant + "," + fmt_double(r.fraction) + "," + fmt_double(r.lambda) + "," +
                            fmt_double(r.temperature);
    if (!groups.count(key)) order.push_back(key);
    groups[key].first.push_back(r.success_rate);
    groups[key].second.push_back(r.mean_return);
  }
  std::string summary = "variant,fraction,lambda,c,success_mean,success_std,return_mean,return_std\n";
  for (const auto& key : order) {
    const auto& g = groups[key];
    summary += key + "," + fmt_double(mean_of(g.first)) + "," + fmt_double(std_of(g.first)) + "," +
               fmt_double(mean_of(g.second)) + "," + fmt_double(std_of(g.second)) + "\n";
  }
  write_text(c.output_dir / "sweep_summary.csv", summary);
  CommandResult res;
  res.summary = summary;
  res.report["rows"] = rows.size();
  std::size_t diverged = 0;
  for (const auto& r : rows) diverged += r.diverged ? 1 : 0;
  res.report["diverged"] = diverged;
  if (diverged > 0) fail(ErrorCode::training_diverged, std::to_string(diverged) + " sweep runs diverged");
  return res;
}

}  // namespace clue::pipeline
