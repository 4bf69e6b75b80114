#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clue/pipeline/stages.hpp"
#include "clue/skills/skills.hpp"

namespace clue::pipeline {

using Json = nlohmann::ordered_json;

enum class PipelineKind { sparse, il, skills };

const char* to_string(PipelineKind k);

// Fully resolved run configuration. Sections mirror the modules; the JSON
// form is what gets echoed next to every run's outputs.
struct RunConfig {
  PipelineKind pipeline = PipelineKind::sparse;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;

  struct Env {
    std::string layout;
    std::string reward = "sparse";
  } env;

  struct Data {
    std::string dataset;
    std::string expert;
    std::size_t expert_k = 1;
    double fraction = 1.0;
    bool exclude_expert = false;
  } data;

  struct Gen {
    std::size_t episodes = 500;
    std::string mix = "expert:0.05,random:0.95";
    std::size_t expert_episodes = 0;
    std::string expert_mix = "expert:1";
  } gen;

  cvae::CvaeConfig cvae;
  std::string cvae_checkpoint;
  RewardConfig reward;

  rl::IqlConfig iql;
  std::size_t iql_steps = 20000;
  std::size_t eval_interval = 0;
  std::string agent_checkpoint;

  struct Eval {
    std::size_t seeds = 10;
    std::size_t episodes = 10;
  } eval;

  skills::SkillsConfig skills;

  struct Sweep {
    std::vector<std::uint64_t> seeds;
    std::vector<double> lambdas;
    std::vector<double> fractions;
    std::vector<double> temperatures;
    bool include_sparse_baseline = true;
  } sweep;

  static RunConfig from_json(const Json& j);
  Json to_json() const;
};

Json default_config();

// defaults <- file <- overrides, each applied as a JSON merge patch. Unknown
// keys are rejected so typos surface as validation errors. fallback_seed only
// applies when neither the file nor the overrides set a seed.
Json resolve_config(const Json& file, const Json& overrides,
                    std::optional<std::uint64_t> fallback_seed = std::nullopt);

}  // namespace clue::pipeline
