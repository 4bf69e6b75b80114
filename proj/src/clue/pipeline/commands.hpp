#pragma once

#include <string>
#include <vector>

#include "clue/pipeline/config.hpp"

namespace clue::pipeline {

struct CommandResult {
  std::string summary;  // human readable, one line per item
  Json report;          // machine readable counterpart
};

const std::vector<std::string>& command_names();

// Runs one subcommand against a resolved config, writing its outputs (and the
// config echo) under config.output_dir. Divergence and partial skill failure
// are raised as clue::Error after the partial outputs are on disk.
CommandResult run_command(const std::string& name, const RunConfig& config);

CommandResult cmd_gen_data(const RunConfig& c);
CommandResult cmd_train_cvae(const RunConfig& c);
CommandResult cmd_relabel(const RunConfig& c);
CommandResult cmd_train(const RunConfig& c);
CommandResult cmd_eval(const RunConfig& c);
CommandResult cmd_skills(const RunConfig& c);
CommandResult cmd_sweep(const RunConfig& c);

struct SweepRow {
  std::uint64_t seed = 0;
  std::string variant;  // "sparse" or "clue"
  double fraction = 1.0;
  double lambda = 0.0;
  double temperature = 0.0;
  double expert_spread = 0.0;
  double mean_return = 0.0;
  double success_rate = 0.0;
  bool diverged = false;
};

// Paired sparse-reward vs relabeled IQL runs over the seed x fraction x
// lambda x temperature grid. Every variant of a seed shares the data, the
// agent initialization and the evaluation episodes.
std::vector<SweepRow> sweep_rows(const RunConfig& c);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Reward histogram over [0, 1] as bin_lo,bin_hi,count.
std::string reward_histogram_csv(const std::vector<double>& rewards, std::size_t bins = 20);

// seed,mean_return,success_rate rows for consecutive evaluation seeds.
std::string scores_csv(std::uint64_t first_seed, const std::vector<env::EvalSummary>& scores);

}  // namespace clue::pipeline
