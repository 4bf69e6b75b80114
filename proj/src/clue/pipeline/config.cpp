#include "clue/pipeline/config.hpp"

#include "clue/error.hpp"

namespace clue::pipeline {

namespace {

void reject_unknown(const Json& defaults, const Json& given, const std::string& path) {
  if (!given.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) fail(ErrorCode::validation_error, "unknown config key '" + key + "'");
    if (defaults.at(it.key()).is_object()) reject_unknown(defaults.at(it.key()), it.value(), key);
  }
}

template <typename T>
T get(const Json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::validation_error, std::string("config ") + section + "." + key + ": " + e.what());
  }
}

}  // namespace

const char* to_string(PipelineKind k) {
  switch (k) {
    case PipelineKind::sparse: return "sparse";
    case PipelineKind::il: return "il";
    case PipelineKind::skills: return "skills";
  }
  return "sparse";
}

Json default_config() {
  const RunConfig c;
  Json j = c.to_json();
  j["seed"] = nullptr;
  return j;
}

Json resolve_config(const Json& file, const Json& overrides, std::optional<std::uint64_t> fallback_seed) {
  const Json defaults = default_config();
  if (!file.is_null() && !file.is_object()) fail(ErrorCode::validation_error, "config file must hold a JSON object");
  if (!overrides.is_null() && !overrides.is_object()) fail(ErrorCode::validation_error, "overrides must be a JSON object");
  reject_unknown(defaults, file, "");
  reject_unknown(defaults, overrides, "");
  Json resolved = defaults;
  if (file.is_object()) resolved.merge_patch(file);
  if (overrides.is_object()) resolved.merge_patch(overrides);
  if (resolved.at("seed").is_null() && fallback_seed) resolved["seed"] = *fallback_seed;
  if (resolved.at("seed").is_null()) fail(ErrorCode::validation_error, "a seed is required (--seed, config, or CLUE_SEED)");
  // Round-trip through the typed form to validate and normalize.
  return RunConfig::from_json(resolved).to_json();
}

RunConfig RunConfig::from_json(const Json& j) {
  RunConfig c;
  try {
    const auto p = j.at("pipeline").get<std::string>();
    if (p == "sparse") c.pipeline = PipelineKind::sparse;
    else if (p == "il") c.pipeline = PipelineKind::il;
    else if (p == "skills") c.pipeline = PipelineKind::skills;
    else fail(ErrorCode::validation_error, "pipeline must be sparse, il or skills");
    if (j.at("seed").is_null()) fail(ErrorCode::validation_error, "a seed is required");
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::validation_error, std::string("config: ") + e.what());
  }
  c.env.layout = get<std::string>(j, "env", "layout");
  c.env.reward = get<std::string>(j, "env", "reward");
  if (c.env.reward != "sparse" && c.env.reward != "dense")
    fail(ErrorCode::validation_error, "env.reward must be sparse or dense");

  c.data.dataset = get<std::string>(j, "data", "dataset");
  c.data.expert = get<std::string>(j, "data", "expert");
  c.data.expert_k = get<std::size_t>(j, "data", "expert_k");
  c.data.fraction = get<double>(j, "data", "fraction");
  c.data.exclude_expert = get<bool>(j, "data", "exclude_expert");
  if (!(c.data.fraction > 0.0 && c.data.fraction <= 1.0)) fail(ErrorCode::validation_error, "data.fraction must lie in (0, 1]");
  if (c.data.expert_k < 1) fail(ErrorCode::validation_error, "data.expert_k must be at least 1");

  c.gen.episodes = get<std::size_t>(j, "gen", "episodes");
  c.gen.mix = get<std::string>(j, "gen", "mix");
  c.gen.expert_episodes = get<std::size_t>(j, "gen", "expert_episodes");
  c.gen.expert_mix = get<std::string>(j, "gen", "expert_mix");

  c.cvae.latent_dim = get<std::size_t>(j, "cvae", "latent_dim");
  c.cvae.hidden = get<std::vector<std::size_t>>(j, "cvae", "hidden");
  c.cvae.batch_size = get<std::size_t>(j, "cvae", "batch_size");
  c.cvae.iterations = get<std::size_t>(j, "cvae", "iterations");
  c.cvae.learning_rate = get<double>(j, "cvae", "lr");
  c.cvae.calibration_weight = get<double>(j, "cvae", "lambda");
  c.cvae.elbo_samples = get<std::size_t>(j, "cvae", "elbo_samples");
  c.cvae.decoder_std = get<double>(j, "cvae", "decoder_std");
  if (!(c.cvae.decoder_std > 0.0)) fail(ErrorCode::validation_error, "cvae.decoder_std must be positive");
  c.cvae_checkpoint = get<std::string>(j, "cvae", "checkpoint");
  c.cvae.exclude_expert_from_elbo = c.data.exclude_expert;
  if (c.cvae.calibration_weight < 0.0) fail(ErrorCode::validation_error, "cvae.lambda must be non-negative");
  if (c.cvae.batch_size == 0 || c.cvae.elbo_samples == 0) fail(ErrorCode::validation_error, "cvae batch and samples must be positive");

  c.reward.temperature = get<double>(j, "reward", "c");
  if (!(c.reward.temperature > 0.0)) fail(ErrorCode::validation_error, "reward.c must be positive");
  try {
    c.reward.mode = reward::sampling_mode_from_string(get<std::string>(j, "reward", "sampling_mode"));
  } catch (const Error& e) {
    fail(ErrorCode::validation_error, std::string("config reward.sampling_mode: ") + e.what());
  }

  c.iql.expectile = get<double>(j, "iql", "expectile");
  c.iql.awr_temperature = get<double>(j, "iql", "beta");
  c.iql.discount = get<double>(j, "iql", "discount");
  c.iql.polyak = get<double>(j, "iql", "polyak");
  c.iql.learning_rate = get<double>(j, "iql", "lr");
  c.iql.batch_size = get<std::size_t>(j, "iql", "batch_size");
  c.iql.hidden = get<std::vector<std::size_t>>(j, "iql", "hidden");
  c.iql.dropout = get<double>(j, "iql", "dropout");
  c.iql.awr_clip = get<double>(j, "iql", "awr_clip");
  try {
    c.iql.reward_scaling = rl::scale_mode_from_string(get<std::string>(j, "iql", "reward_scaling"));
  } catch (const Error& e) {
    fail(ErrorCode::validation_error, std::string("config iql.reward_scaling: ") + e.what());
  }
  c.iql_steps = get<std::size_t>(j, "iql", "steps");
  c.eval_interval = get<std::size_t>(j, "iql", "eval_interval");
  c.agent_checkpoint = get<std::string>(j, "iql", "agent");
  try {
    c.iql.validate();
  } catch (const Error& e) {
    fail(ErrorCode::validation_error, e.what());
  }

  c.eval.seeds = get<std::size_t>(j, "eval", "seeds");
  c.eval.episodes = get<std::size_t>(j, "eval", "episodes");
  if (c.eval.seeds == 0 || c.eval.episodes == 0) fail(ErrorCode::validation_error, "eval seeds and episodes must be positive");

  c.skills.k = get<std::size_t>(j, "skills", "k");
  c.skills.max_iter = get<std::size_t>(j, "skills", "max_iter");
  c.skills.n_init = get<std::size_t>(j, "skills", "n_init");
  c.skills.min_cluster_fraction = get<double>(j, "skills", "min_cluster_fraction");
  c.skills.per_cluster_from_scratch = get<bool>(j, "skills", "per_cluster_from_scratch");
  c.skills.finetune_iterations = get<std::size_t>(j, "skills", "finetune_iterations");
  c.skills.workers = get<std::size_t>(j, "skills", "parallel");
  if (c.skills.k == 0 || c.skills.workers == 0) fail(ErrorCode::validation_error, "skills.k and skills.parallel must be positive");
  c.skills.cvae = c.cvae;
  c.skills.reward = c.reward;
  c.skills.iql = c.iql;
  c.skills.iql_steps = c.iql_steps;
  c.skills.eval_episodes = c.eval.episodes;

  c.sweep.seeds = get<std::vector<std::uint64_t>>(j, "sweep", "seeds");
  c.sweep.lambdas = get<std::vector<double>>(j, "sweep", "lambdas");
  c.sweep.fractions = get<std::vector<double>>(j, "sweep", "fractions");
  c.sweep.temperatures = get<std::vector<double>>(j, "sweep", "temperatures");
  c.sweep.include_sparse_baseline = get<bool>(j, "sweep", "sparse_baseline");
  return c;
}

Json RunConfig::to_json() const {
  Json j;
  j["pipeline"] = to_string(pipeline);
  j["seed"] = seed;
  j["output_dir"] = output_dir.string();
  j["env"] = {{"layout", env.layout}, {"reward", env.reward}};
  j["data"] = {{"dataset", data.dataset},
               {"expert", data.expert},
               {"expert_k", data.expert_k},
               {"fraction", data.fraction},
               {"exclude_expert", data.exclude_expert}};
  j["gen"] = {{"episodes", gen.episodes},
              {"mix", gen.mix},
              {"expert_episodes", gen.expert_episodes},
              {"expert_mix", gen.expert_mix}};
  j["cvae"] = {{"latent_dim", cvae.latent_dim},   {"hidden", cvae.hidden},
               {"batch_size", cvae.batch_size},   {"iterations", cvae.iterations},
               {"lr", cvae.learning_rate},        {"lambda", cvae.calibration_weight},
               {"elbo_samples", cvae.elbo_samples}, {"decoder_std", cvae.decoder_std},
               {"checkpoint", cvae_checkpoint}};
  j["reward"] = {{"c", reward.temperature}, {"sampling_mode", reward::to_string(reward.mode)}};
  j["iql"] = {{"expectile", iql.expectile},
              {"beta", iql.awr_temperature},
              {"discount", iql.discount},
              {"polyak", iql.polyak},
              {"lr", iql.learning_rate},
              {"batch_size", iql.batch_size},
              {"hidden", iql.hidden},
              {"dropout", iql.dropout},
              {"awr_clip", iql.awr_clip},
              {"reward_scaling", rl::to_string(iql.reward_scaling)},
              {"steps", iql_steps},
              {"eval_interval", eval_interval},
              {"agent", agent_checkpoint}};
  j["eval"] = {{"seeds", eval.seeds}, {"episodes", eval.episodes}};
  j["skills"] = {{"k", skills.k},
                 {"max_iter", skills.max_iter},
                 {"n_init", skills.n_init},
                 {"min_cluster_fraction", skills.min_cluster_fraction},
                 {"per_cluster_from_scratch", skills.per_cluster_from_scratch},
                 {"finetune_iterations", skills.finetune_iterations},
                 {"parallel", skills.workers}};
  j["sweep"] = {{"seeds", sweep.seeds},
                {"lambdas", sweep.lambdas},
                {"fractions", sweep.fractions},
                {"temperatures", sweep.temperatures},
                {"sparse_baseline", sweep.include_sparse_baseline}};
  return j;
}

}  // namespace clue::pipeline
