#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clue/clue.h"

namespace {

using Json = nlohmann::ordered_json;

enum class Kind { text, count, real, toggle_on, toggle_off, reals, counts };

struct Flag {
  const char* name;
  const char* section;  // nullptr for top-level keys
  const char* key;
  Kind kind;
  const char* help;
};

// Every flag maps onto one key of the JSON config.
const std::vector<Flag> kFlags = {
    {"--pipeline", nullptr, "pipeline", Kind::text, "sparse, il or skills"},
    {"--seed", nullptr, "seed", Kind::count, "random seed (falls back to CLUE_SEED)"},
    {"--out,-o", nullptr, "output_dir", Kind::text, "output directory"},
    {"--layout", "env", "layout", Kind::text, "maze layout JSON"},
    {"--env-reward", "env", "reward", Kind::text, "sparse or dense"},
    {"--dataset", "data", "dataset", Kind::text, "input dataset (JSONL)"},
    {"--expert", "data", "expert", Kind::text, "expert dataset for the imitation pipeline"},
    {"--expert-k", "data", "expert_k", Kind::count, "number of expert trajectories"},
    {"--fraction", "data", "fraction", Kind::real, "fraction of trajectories to keep"},
    {"--exclude-expert", "data", "exclude_expert", Kind::toggle_on, "leave expert data out of the ELBO pool"},
    {"--episodes", "gen", "episodes", Kind::count, "episodes to generate"},
    {"--mix", "gen", "mix", Kind::text, "behavior mixture, e.g. expert:0.05,random:0.95"},
    {"--expert-episodes", "gen", "expert_episodes", Kind::count, "also write an expert dataset"},
    {"--expert-mix", "gen", "expert_mix", Kind::text, "mixture for the expert dataset"},
    {"--latent-dim", "cvae", "latent_dim", Kind::count, "latent size (0 = twice the action size)"},
    {"--cvae-hidden", "cvae", "hidden", Kind::counts, "CVAE hidden widths, comma separated"},
    {"--cvae-batch", "cvae", "batch_size", Kind::count, "CVAE batch size"},
    {"--cvae-iterations", "cvae", "iterations", Kind::count, "CVAE iterations"},
    {"--cvae-lr", "cvae", "lr", Kind::real, "CVAE learning rate"},
    {"--lambda", "cvae", "lambda", Kind::real, "calibration weight (0 disables calibration)"},
    {"--elbo-samples", "cvae", "elbo_samples", Kind::count, "latent samples per ELBO term"},
    {"--decoder-std", "cvae", "decoder_std", Kind::real, "std of the Gaussian action likelihood"},
    {"--cvae-ckpt", "cvae", "checkpoint", Kind::text, "reuse a trained CVAE"},
    {"--c", "reward", "c", Kind::real, "reward temperature"},
    {"--sampling-mode", "reward", "sampling_mode", Kind::text, "mean or sample"},
    {"--expectile", "iql", "expectile", Kind::real, "IQL expectile"},
    {"--beta", "iql", "beta", Kind::real, "AWR inverse temperature"},
    {"--discount", "iql", "discount", Kind::real, "discount factor"},
    {"--polyak", "iql", "polyak", Kind::real, "target averaging rate"},
    {"--iql-lr", "iql", "lr", Kind::real, "IQL learning rate"},
    {"--iql-batch", "iql", "batch_size", Kind::count, "IQL batch size"},
    {"--iql-hidden", "iql", "hidden", Kind::counts, "IQL hidden widths, comma separated"},
    {"--steps", "iql", "steps", Kind::count, "IQL gradient steps"},
    {"--dropout", "iql", "dropout", Kind::real, "policy dropout rate"},
    {"--awr-clip", "iql", "awr_clip", Kind::real, "AWR weight clip"},
    {"--reward-scaling", "iql", "reward_scaling", Kind::text, "return_range, shift or none"},
    {"--eval-interval", "iql", "eval_interval", Kind::count, "steps between evaluations during training"},
    {"--agent", "iql", "agent", Kind::text, "agent checkpoint to evaluate"},
    {"--eval-seeds", "eval", "seeds", Kind::count, "evaluation seeds"},
    {"--eval-episodes", "eval", "episodes", Kind::count, "episodes per evaluation seed"},
    {"--k", "skills", "k", Kind::count, "number of clusters"},
    {"--kmeans-iter", "skills", "max_iter", Kind::count, "Lloyd iteration cap"},
    {"--n-init", "skills", "n_init", Kind::count, "k-means restarts"},
    {"--min-cluster-fraction", "skills", "min_cluster_fraction", Kind::real, "drop smaller clusters"},
    {"--per-cluster-from-scratch", "skills", "per_cluster_from_scratch", Kind::toggle_on,
     "train every skill CVAE from scratch"},
    {"--finetune-iterations", "skills", "finetune_iterations", Kind::count, "per-skill fine-tuning iterations"},
    {"--parallel-skills", "skills", "parallel", Kind::count, "concurrent skill workers"},
    {"--seeds", "sweep", "seeds", Kind::counts, "sweep seeds, comma separated"},
    {"--lambdas", "sweep", "lambdas", Kind::reals, "sweep calibration weights"},
    {"--fractions", "sweep", "fractions", Kind::reals, "sweep dataset fractions"},
    {"--temperatures", "sweep", "temperatures", Kind::reals, "sweep reward temperatures"},
    {"--no-sparse-baseline", "sweep", "sparse_baseline", Kind::toggle_off, "skip the sparse-reward baseline"},
};

std::uint64_t parse_count(const std::string& s, const std::string& flag) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw CLI::ValidationError(flag, "expected a non-negative integer, got '" + s + "'");
  }
  if (used != s.size()) throw CLI::ValidationError(flag, "expected a non-negative integer, got '" + s + "'");
  return v;
}

double parse_real(const std::string& s, const std::string& flag) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw CLI::ValidationError(flag, "expected a number, got '" + s + "'");
  }
  if (used != s.size()) throw CLI::ValidationError(flag, "expected a number, got '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

Json flag_value(const Flag& f, const std::string& raw) {
  switch (f.kind) {
    case Kind::text: return raw;
    case Kind::count: return parse_count(raw, f.name);
    case Kind::real: return parse_real(raw, f.name);
    case Kind::toggle_on: return true;
    case Kind::toggle_off: return false;
    case Kind::reals: {
      Json a = Json::array();
      for (const auto& x : split(raw)) a.push_back(parse_real(x, f.name));
      return a;
    }
    case Kind::counts: {
      Json a = Json::array();
      for (const auto& x : split(raw)) a.push_back(parse_count(x, f.name));
      return a;
    }
  }
  return nullptr;
}

int exit_code(clue_status s) {
  switch (s) {
    case CLUE_OK: return 0;
    case CLUE_ERR_INVALID_ARGUMENT: return 2;
    case CLUE_ERR_DIVERGED: return 4;
    case CLUE_ERR_PARTIAL: return 5;
    case CLUE_ERR_INTERNAL: return 1;
    default: return 3;
  }
}

int report_error(clue_status s) {
  std::cerr << "error (" << clue_status_name(s) << "): " << clue_last_error() << '\n';
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline reward relabeling with a calibrated latent space"};
  app.require_subcommand(1);
  std::string config_path;
  bool print_config = false;

  struct Bound {
    const Flag* flag;
    CLI::Option* opt;
  };
  std::map<std::string, std::vector<Bound>> bound;
  std::map<std::string, std::map<std::string, std::string>> raw;

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"gen-data", "generate behavior (and expert) datasets on a maze"},
      {"train-cvae", "train the reward CVAE and compute the expert anchor"},
      {"relabel", "relabel a dataset with intrinsic rewards"},
      {"train", "train an IQL agent on a labeled dataset"},
      {"eval", "evaluate an agent checkpoint"},
      {"skills", "discover skills from reward-free data"},
      {"sweep", "paired sparse-reward vs relabeled runs over a grid"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_flag("--print-config", print_config, "print the resolved config and exit");
    for (const auto& f : kFlags) {
      CLI::Option* opt = nullptr;
      if (f.kind == Kind::toggle_on || f.kind == Kind::toggle_off) {
        opt = sub->add_flag(f.name, f.help);
      } else {
        opt = sub->add_option(f.name, raw[name][f.name], f.help);
      }
      bound[name].push_back({&f, opt});
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  Json overrides = Json::object();
  try {
    for (const auto& b : bound[command]) {
      if (b.opt->count() == 0) continue;
      const Json v = flag_value(*b.flag, raw[command][b.flag->name]);
      if (b.flag->section == nullptr) overrides[b.flag->key] = v;
      else overrides[b.flag->section][b.flag->key] = v;
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  std::string file_text;
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      std::cerr << "error (validation_error): cannot read config file " << config_path << '\n';
      return 3;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    file_text = ss.str();
  }

  std::uint64_t env_seed = 0;
  const std::uint64_t* fallback = nullptr;
  if (const char* s = std::getenv("CLUE_SEED"); s != nullptr && *s != '\0') {
    try {
      env_seed = parse_count(s, "CLUE_SEED");
    } catch (const CLI::ParseError& e) {
      std::cerr << e.what() << '\n';
      return 2;
    }
    fallback = &env_seed;
  }

  const std::string overrides_text = overrides.dump();
  char* resolved = nullptr;
  clue_status st = clue_config_resolve(file_text.empty() ? nullptr : file_text.c_str(), overrides_text.c_str(),
                                       fallback, &resolved);
  if (st != CLUE_OK) return report_error(st);
  if (print_config) {
    std::cout << resolved << '\n';
    clue_string_free(resolved);
    return 0;
  }

  char* summary = nullptr;
  st = clue_command_run(command.c_str(), resolved, &summary, nullptr);
  clue_string_free(resolved);
  if (summary != nullptr) {
    std::cout << summary;
    clue_string_free(summary);
  }
  if (st != CLUE_OK) return report_error(st);
  return 0;
}
