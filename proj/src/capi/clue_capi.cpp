#include "clue/clue.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <string>

#include <json.hpp>

#include "clue/cvae/cvae.hpp"
#include "clue/dataset/dataset.hpp"
#include "clue/envs/rollout.hpp"
#include "clue/error.hpp"
#include "clue/offline_rl/iql.hpp"
#include "clue/offline_rl/reward_scaler.hpp"
#include "clue/pipeline/commands.hpp"
#include "clue/reward/reward.hpp"
#include "clue/skills/kmeans.hpp"

struct clue_dataset {
  clue::data::Dataset d;
};
struct clue_maze {
  clue::env::PointMaze maze;
};
struct clue_cvae {
  std::shared_ptr<const clue::cvae::CvaeModel> model;
};
struct clue_labeler {
  clue::reward::RewardLabeler labeler;
};
struct clue_agent {
  clue::rl::IqlAgent agent;
};
struct clue_kmeans {
  clue::skills::ClusterModel cm;
};

namespace {

thread_local std::string g_last_error;

clue_status status_of(clue::ErrorCode code) {
  using clue::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument: return CLUE_ERR_INVALID_ARGUMENT;
    case ErrorCode::parse_error: return CLUE_ERR_PARSE;
    case ErrorCode::validation_error: return CLUE_ERR_VALIDATION;
    case ErrorCode::training_diverged: return CLUE_ERR_DIVERGED;
    case ErrorCode::no_expert_found: return CLUE_ERR_NO_EXPERT;
    case ErrorCode::missing_rewards: return CLUE_ERR_MISSING_REWARDS;
    case ErrorCode::degenerate_range: return CLUE_ERR_DEGENERATE_RANGE;
    case ErrorCode::io_error: return CLUE_ERR_IO;
    case ErrorCode::partial_failure: return CLUE_ERR_PARTIAL;
  }
  return CLUE_ERR_INTERNAL;
}

template <typename F>
clue_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return CLUE_OK;
  } catch (const clue::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return CLUE_ERR_PARSE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CLUE_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CLUE_ERR_INTERNAL;
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* name) {
  if (p == nullptr) clue::fail(clue::ErrorCode::invalid_argument, std::string(name) + " must not be NULL");
}

clue::pipeline::Json parse_optional(const char* text) {
  if (text == nullptr || *text == '\0') return nullptr;
  try {
    return clue::pipeline::Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    clue::fail(clue::ErrorCode::parse_error, std::string("config JSON: ") + e.what());
  }
}

clue::nn::Vector vec(const double* p, std::size_t n) { return Eigen::Map<const clue::nn::Vector>(p, n); }

}  // namespace

extern "C" {

const char* clue_last_error(void) { return g_last_error.c_str(); }

const char* clue_status_name(clue_status status) {
  switch (status) {
    case CLUE_OK: return "ok";
    case CLUE_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CLUE_ERR_PARSE: return "parse_error";
    case CLUE_ERR_VALIDATION: return "validation_error";
    case CLUE_ERR_DIVERGED: return "training_diverged";
    case CLUE_ERR_NO_EXPERT: return "no_expert_found";
    case CLUE_ERR_MISSING_REWARDS: return "missing_rewards";
    case CLUE_ERR_DEGENERATE_RANGE: return "degenerate_range";
    case CLUE_ERR_IO: return "io_error";
    case CLUE_ERR_PARTIAL: return "partial_failure";
    case CLUE_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* clue_version(void) { return "0.1.0"; }

void clue_string_free(char* s) { std::free(s); }

void clue_set_warning_callback(clue_warning_fn fn, void* user) {
  if (fn == nullptr) {
    clue::set_warning_sink(nullptr);
    return;
  }
  clue::set_warning_sink([fn, user](const std::string& m) { fn(m.c_str(), user); });
}

clue_status clue_config_defaults(char** json_out) {
  return guarded([&] {
    need(json_out, "json_out");
    *json_out = copy_string(clue::pipeline::default_config().dump(2));
  });
}

clue_status clue_config_resolve(const char* file_json, const char* overrides_json, const uint64_t* fallback_seed,
                                char** resolved_out) {
  return guarded([&] {
    need(resolved_out, "resolved_out");
    std::optional<std::uint64_t> fb;
    if (fallback_seed != nullptr) fb = *fallback_seed;
    const auto resolved =
        clue::pipeline::resolve_config(parse_optional(file_json), parse_optional(overrides_json), fb);
    *resolved_out = copy_string(resolved.dump(2));
  });
}

clue_status clue_command_run(const char* command, const char* resolved_json, char** summary_out, char** report_out) {
  return guarded([&] {
    need(command, "command");
    need(resolved_json, "resolved_json");
    const auto config = clue::pipeline::RunConfig::from_json(parse_optional(resolved_json));
    const auto result = clue::pipeline::run_command(command, config);
    if (summary_out != nullptr) *summary_out = copy_string(result.summary);
    if (report_out != nullptr) *report_out = copy_string(result.report.dump());
  });
}

clue_status clue_dataset_load(const char* path, clue_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new clue_dataset{clue::data::load(path)};
  });
}

clue_status clue_dataset_save(const clue_dataset* d, const char* path) {
  return guarded([&] {
    need(d, "dataset");
    need(path, "path");
    clue::data::save(d->d, path);
  });
}

void clue_dataset_free(clue_dataset* d) { delete d; }

clue_status clue_dataset_info(const clue_dataset* d, size_t* trajectories, size_t* transitions, size_t* state_dim,
                              size_t* action_dim, int* labeled) {
  return guarded([&] {
    need(d, "dataset");
    if (trajectories) *trajectories = d->d.trajectories.size();
    if (transitions) *transitions = d->d.transition_count();
    if (state_dim) *state_dim = d->d.state_dim;
    if (action_dim) *action_dim = d->d.action_dim;
    if (labeled) *labeled = d->d.reward_labeled() ? 1 : 0;
  });
}

clue_status clue_dataset_returns(const clue_dataset* d, double* out, size_t capacity, size_t* count) {
  return guarded([&] {
    need(d, "dataset");
    const auto stats = clue::data::compute_returns(d->d);
    if (count) *count = stats.returns.size();
    if (out != nullptr)
      for (std::size_t i = 0; i < stats.returns.size() && i < capacity; ++i) out[i] = stats.returns[i];
  });
}

clue_status clue_dataset_filter_expert(const clue_dataset* d, size_t k, clue_dataset** expert, clue_dataset** rest) {
  return guarded([&] {
    need(d, "dataset");
    need(expert, "expert");
    auto split = clue::data::filter_expert_by_success(d->d, k);
    *expert = new clue_dataset{std::move(split.expert)};
    if (rest != nullptr) *rest = new clue_dataset{std::move(split.rest)};
  });
}

clue_status clue_reward_scale(const clue_dataset* d, double* scale) {
  return guarded([&] {
    need(d, "dataset");
    need(scale, "scale");
    *scale = clue::rl::fit_reward_scaler(d->d).scale;
  });
}

clue_status clue_maze_load(const char* path, clue_maze** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new clue_maze{clue::env::PointMaze::load(path)};
  });
}

void clue_maze_free(clue_maze* m) { delete m; }

clue_status clue_maze_step(const clue_maze* m, const double state[2], const double action[2], size_t t,
                           double next_state[2], double* reward, int* terminal, int* truncated) {
  return guarded([&] {
    need(m, "maze");
    need(state, "state");
    need(action, "action");
    const auto r = m->maze.step(vec(state, 2), vec(action, 2), t);
    if (next_state) {
      next_state[0] = r.next_state[0];
      next_state[1] = r.next_state[1];
    }
    if (reward) *reward = r.reward;
    if (terminal) *terminal = r.terminal ? 1 : 0;
    if (truncated) *truncated = r.truncated ? 1 : 0;
  });
}

clue_status clue_maze_generate(const clue_maze* m, const char* mixture, size_t episodes, uint64_t seed,
                               clue_dataset** out) {
  return guarded([&] {
    need(m, "maze");
    need(mixture, "mixture");
    need(out, "out");
    clue::Rng rng(seed, clue::pipeline::kStreamData);
    *out = new clue_dataset{clue::env::generate_dataset(m->maze, clue::env::parse_mixture(mixture), episodes, rng)};
  });
}

clue_status clue_cvae_load(const char* checkpoint, clue_cvae** out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    *out = new clue_cvae{std::make_shared<const clue::cvae::CvaeModel>(clue::cvae::load_model(checkpoint))};
  });
}

void clue_cvae_free(clue_cvae* m) { delete m; }

clue_status clue_cvae_dims(const clue_cvae* m, size_t* state_dim, size_t* action_dim, size_t* latent_dim) {
  return guarded([&] {
    need(m, "cvae");
    if (state_dim) *state_dim = m->model->state_dim;
    if (action_dim) *action_dim = m->model->action_dim;
    if (latent_dim) *latent_dim = m->model->latent_dim;
  });
}

clue_status clue_cvae_encode(const clue_cvae* m, const double* state, const double* action, double* mean,
                             double* std) {
  return guarded([&] {
    need(m, "cvae");
    need(state, "state");
    need(action, "action");
    const auto& model = *m->model;
    const auto g = clue::cvae::encode(model, vec(state, model.state_dim), vec(action, model.action_dim));
    for (std::size_t i = 0; i < model.latent_dim; ++i) {
      if (mean) mean[i] = g.mean[i];
      if (std) std[i] = g.std[i];
    }
  });
}

clue_status clue_labeler_create(const clue_cvae* m, const clue_dataset* expert, double c, clue_labeler** out) {
  return guarded([&] {
    need(m, "cvae");
    need(expert, "expert");
    need(out, "out");
    auto anchor = clue::reward::expert_anchor(*m->model, expert->d);
    *out = new clue_labeler{clue::reward::RewardLabeler(m->model, std::move(anchor), c)};
  });
}

void clue_labeler_free(clue_labeler* l) { delete l; }

clue_status clue_labeler_reward(const clue_labeler* l, const double* state, const double* action, double* reward) {
  return guarded([&] {
    need(l, "labeler");
    need(state, "state");
    need(action, "action");
    need(reward, "reward");
    const auto& model = l->labeler.model();
    *reward = l->labeler.reward(vec(state, model.state_dim), vec(action, model.action_dim));
  });
}

clue_status clue_reward_from_distance(double squared_distance, double c, double* reward) {
  return guarded([&] {
    need(reward, "reward");
    *reward = clue::reward::RewardLabeler::from_distance(squared_distance, c);
  });
}

clue_status clue_agent_load(const char* checkpoint, clue_agent** out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    *out = new clue_agent{clue::rl::load_agent(checkpoint)};
  });
}

void clue_agent_free(clue_agent* a) { delete a; }

clue_status clue_agent_act(const clue_agent* a, const double* state, double* action) {
  return guarded([&] {
    need(a, "agent");
    need(state, "state");
    need(action, "action");
    const auto act = clue::rl::act(a->agent, vec(state, a->agent.state_dim), true);
    for (Eigen::Index i = 0; i < act.size(); ++i) action[i] = act[i];
  });
}

clue_status clue_kmeans_fit(const double* points, size_t n, size_t dim, size_t k, size_t max_iter, uint64_t seed,
                            clue_kmeans** out) {
  return guarded([&] {
    need(points, "points");
    need(out, "out");
    const clue::nn::Matrix x = Eigen::Map<const clue::nn::Matrix>(points, n, dim);
    clue::Rng rng(seed, clue::pipeline::kStreamCluster);
    *out = new clue_kmeans{clue::skills::kmeans(x, k, max_iter, 1, rng)};
  });
}

void clue_kmeans_free(clue_kmeans* km) { delete km; }

clue_status clue_kmeans_assignment(const clue_kmeans* km, size_t* out, size_t n) {
  return guarded([&] {
    need(km, "kmeans");
    need(out, "out");
    clue::require(n == km->cm.assignment.size(), "assignment buffer size does not match the point count");
    for (std::size_t i = 0; i < n; ++i) out[i] = km->cm.assignment[i];
  });
}

clue_status clue_kmeans_inertia(const clue_kmeans* km, double* inertia, size_t* iterations) {
  return guarded([&] {
    need(km, "kmeans");
    if (inertia) *inertia = km->cm.inertia;
    if (iterations) *iterations = km->cm.iterations;
  });
}

}  // extern "C"
