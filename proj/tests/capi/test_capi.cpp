#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "clue/clue.h"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::string layout(const char* name) { return std::string(CLUE_SOURCE_DIR) + "/layouts/" + name + ".json"; }

std::string take(char* s) {
  std::string out = s == nullptr ? "" : s;
  clue_string_free(s);
  return out;
}

clue_maze* load_maze(const char* name) {
  clue_maze* m = nullptr;
  REQUIRE(clue_maze_load(layout(name).c_str(), &m) == CLUE_OK);
  return m;
}

void collect(const char* msg, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(msg); }

}  // namespace

TEST_CASE("status names and last error") {
  CHECK(std::string(clue_status_name(CLUE_OK)) == "ok");
  CHECK(std::string(clue_status_name(CLUE_ERR_VALIDATION)) == "validation_error");
  CHECK(std::strlen(clue_version()) > 0);
  clue_maze* m = nullptr;
  CHECK(clue_maze_load("/nonexistent/maze.json", &m) != CLUE_OK);
  CHECK(m == nullptr);
  CHECK(std::strlen(clue_last_error()) > 0);
  double r = 0;
  CHECK(clue_reward_from_distance(0.0, 1.0, &r) == CLUE_OK);
  CHECK(std::string(clue_last_error()).empty());
}

TEST_CASE("null arguments are invalid") {
  CHECK(clue_dataset_load(nullptr, nullptr) == CLUE_ERR_INVALID_ARGUMENT);
  CHECK(clue_reward_from_distance(1.0, 1.0, nullptr) == CLUE_ERR_INVALID_ARGUMENT);
  CHECK(clue_agent_act(nullptr, nullptr, nullptr) == CLUE_ERR_INVALID_ARGUMENT);
  clue_dataset_free(nullptr);
  clue_maze_free(nullptr);
}

TEST_CASE("config resolution through the C boundary") {
  char* out = nullptr;
  REQUIRE(clue_config_defaults(&out) == CLUE_OK);
  const Json defaults = Json::parse(take(out));
  CHECK(defaults["seed"].is_null());

  const uint64_t fallback = 8;
  REQUIRE(clue_config_resolve(R"({"seed": 2, "cvae": {"lambda": 0.4}})", R"({"cvae": {"lambda": 0.9}})", &fallback,
                              &out) == CLUE_OK);
  const Json r = Json::parse(take(out));
  CHECK(r["seed"] == 2);
  CHECK(r["cvae"]["lambda"] == 0.9);

  REQUIRE(clue_config_resolve(nullptr, nullptr, &fallback, &out) == CLUE_OK);
  CHECK(Json::parse(take(out))["seed"] == 8);

  CHECK(clue_config_resolve(nullptr, nullptr, nullptr, &out) == CLUE_ERR_VALIDATION);
  CHECK(clue_config_resolve("{oops", nullptr, &fallback, &out) == CLUE_ERR_PARSE);
  CHECK(clue_config_resolve(R"({"bogus": 1})", nullptr, &fallback, &out) == CLUE_ERR_VALIDATION);
}

TEST_CASE("maze stepping") {
  clue_maze* m = load_maze("medium");
  const double s[2] = {0.95, 0.5};
  const double a[2] = {1.0, 0.0};
  double next[2];
  double reward = -1;
  int terminal = -1, truncated = -1;
  REQUIRE(clue_maze_step(m, s, a, 0, next, &reward, &terminal, &truncated) == CLUE_OK);
  CHECK(next[0] == 1.0);
  CHECK(next[1] == 0.5);
  CHECK(reward == 0.0);
  CHECK(terminal == 0);
  CHECK(truncated == 0);
  clue_maze_free(m);
}

TEST_CASE("generated datasets, returns and the reward scale") {
  clue_maze* m = load_maze("umaze");
  clue_dataset* d = nullptr;
  REQUIRE(clue_maze_generate(m, "expert:0.3,random:0.7", 20, 4, &d) == CLUE_OK);
  size_t trajs = 0, trans = 0, sdim = 0, adim = 0;
  int labeled = 0;
  REQUIRE(clue_dataset_info(d, &trajs, &trans, &sdim, &adim, &labeled) == CLUE_OK);
  CHECK(trajs == 20);
  CHECK(sdim == 2);
  CHECK(adim == 2);
  CHECK(labeled == 1);

  size_t count = 0;
  REQUIRE(clue_dataset_returns(d, nullptr, 0, &count) == CLUE_OK);
  REQUIRE(count == 20);
  std::vector<double> ret(count);
  REQUIRE(clue_dataset_returns(d, ret.data(), ret.size(), &count) == CLUE_OK);
  const double lo = *std::min_element(ret.begin(), ret.end());
  const double hi = *std::max_element(ret.begin(), ret.end());
  REQUIRE(hi > lo);
  double scale = 0;
  REQUIRE(clue_reward_scale(d, &scale) == CLUE_OK);
  CHECK(scale == 1000.0 / (hi - lo));

  clue_dataset *expert = nullptr, *rest = nullptr;
  REQUIRE(clue_dataset_filter_expert(d, 2, &expert, &rest) == CLUE_OK);
  size_t e = 0, r = 0;
  clue_dataset_info(expert, &e, nullptr, nullptr, nullptr, nullptr);
  clue_dataset_info(rest, &r, nullptr, nullptr, nullptr, nullptr);
  CHECK(e == 2);
  CHECK(e + r == 20);

  const fs::path path = fs::temp_directory_path() / "clue_capi_roundtrip.jsonl";
  REQUIRE(clue_dataset_save(d, path.string().c_str()) == CLUE_OK);
  clue_dataset* back = nullptr;
  REQUIRE(clue_dataset_load(path.string().c_str(), &back) == CLUE_OK);
  size_t back_trans = 0;
  clue_dataset_info(back, nullptr, &back_trans, nullptr, nullptr, nullptr);
  CHECK(back_trans == trans);
  fs::remove(path);

  clue_dataset_free(back);
  clue_dataset_free(expert);
  clue_dataset_free(rest);
  clue_dataset_free(d);
  clue_maze_free(m);
}

TEST_CASE("degenerate returns: the scale call fails and training warns") {
  const fs::path out = fs::temp_directory_path() / "clue_capi_degenerate";
  fs::remove_all(out);
  fs::create_directories(out);
  clue_maze* m = load_maze("medium");
  clue_dataset* d = nullptr;
  // Three random episodes on the medium maze all fail, so every return is zero.
  REQUIRE(clue_maze_generate(m, "random:1", 3, 1, &d) == CLUE_OK);
  double scale = 0;
  CHECK(clue_reward_scale(d, &scale) == CLUE_ERR_DEGENERATE_RANGE);
  REQUIRE(clue_dataset_save(d, (out / "zero.jsonl").string().c_str()) == CLUE_OK);

  Json file = {{"seed", 1},
               {"output_dir", out.string()},
               {"data", {{"dataset", (out / "zero.jsonl").string()}}},
               {"iql", {{"hidden", {8, 8}}, {"steps", 5}, {"batch_size", 16}}}};
  char* resolved = nullptr;
  REQUIRE(clue_config_resolve(file.dump().c_str(), nullptr, nullptr, &resolved) == CLUE_OK);
  std::vector<std::string> seen;
  clue_set_warning_callback(collect, &seen);
  const clue_status st = clue_command_run("train", resolved, nullptr, nullptr);
  clue_set_warning_callback(nullptr, nullptr);
  clue_string_free(resolved);
  CHECK(st == CLUE_OK);
  REQUIRE(seen.size() == 1);
  CHECK(seen[0].find("unscaled") != std::string::npos);
  clue_dataset_free(d);
  clue_maze_free(m);
  fs::remove_all(out);
}

TEST_CASE("k-means through the C boundary") {
  std::vector<double> pts;
  for (int i = 0; i < 10; ++i) {
    pts.push_back(-5.0 + 0.01 * i);
    pts.push_back(-5.0);
  }
  for (int i = 0; i < 10; ++i) {
    pts.push_back(5.0 + 0.01 * i);
    pts.push_back(5.0);
  }
  clue_kmeans* km = nullptr;
  REQUIRE(clue_kmeans_fit(pts.data(), 20, 2, 2, 100, 3, &km) == CLUE_OK);
  std::vector<size_t> a(20);
  REQUIRE(clue_kmeans_assignment(km, a.data(), a.size()) == CLUE_OK);
  for (size_t i = 0; i < 20; ++i) CHECK(a[i] == (i < 10 ? a[0] : a[10]));
  CHECK(a[0] != a[10]);
  CHECK(clue_kmeans_assignment(km, a.data(), 3) == CLUE_ERR_INVALID_ARGUMENT);
  double inertia = -1;
  size_t iters = 0;
  REQUIRE(clue_kmeans_inertia(km, &inertia, &iters) == CLUE_OK);
  CHECK(inertia >= 0.0);
  CHECK(iters >= 1);
  clue_kmeans_free(km);
}

TEST_CASE("commands, checkpoints, labeler and agent") {
  const fs::path out = fs::temp_directory_path() / "clue_capi_commands";
  fs::remove_all(out);
  Json file = {{"seed", 5},
               {"output_dir", out.string()},
               {"env", {{"layout", layout("umaze")}}},
               {"gen", {{"episodes", 10}, {"mix", "expert:0.3,random:0.7"}}},
               {"cvae", {{"hidden", {16, 16}}, {"iterations", 30}, {"batch_size", 32}}},
               {"iql", {{"hidden", {16, 16}}, {"steps", 30}, {"batch_size", 32}}},
               {"eval", {{"seeds", 1}, {"episodes", 2}}}};
  char* resolved = nullptr;
  REQUIRE(clue_config_resolve(file.dump().c_str(), nullptr, nullptr, &resolved) == CLUE_OK);
  Json cfg = Json::parse(take(resolved));

  char* summary = nullptr;
  char* report = nullptr;
  REQUIRE(clue_command_run("gen-data", cfg.dump().c_str(), &summary, &report) == CLUE_OK);
  CHECK_FALSE(take(summary).empty());
  CHECK(Json::parse(take(report)).contains("dataset"));

  cfg["data"]["dataset"] = (out / "dataset.jsonl").string();
  REQUIRE(clue_command_run("train-cvae", cfg.dump().c_str(), nullptr, nullptr) == CLUE_OK);
  REQUIRE(clue_command_run("train", cfg.dump().c_str(), nullptr, nullptr) == CLUE_OK);
  CHECK(clue_command_run("teleport", cfg.dump().c_str(), nullptr, nullptr) == CLUE_ERR_INVALID_ARGUMENT);

  clue_cvae* model = nullptr;
  REQUIRE(clue_cvae_load((out / "cvae.ckpt").string().c_str(), &model) == CLUE_OK);
  size_t sdim = 0, adim = 0, zdim = 0;
  clue_cvae_dims(model, &sdim, &adim, &zdim);
  CHECK(sdim == 2);
  CHECK(adim == 2);
  CHECK(zdim == 4);

  clue_dataset* d = nullptr;
  REQUIRE(clue_dataset_load((out / "dataset.jsonl").string().c_str(), &d) == CLUE_OK);
  clue_dataset* expert = nullptr;
  REQUIRE(clue_dataset_filter_expert(d, 1, &expert, nullptr) == CLUE_OK);

  clue_labeler* lab = nullptr;
  REQUIRE(clue_labeler_create(model, expert, 6.0, &lab) == CLUE_OK);
  CHECK(clue_labeler_create(model, expert, 0.0, &lab) != CLUE_OK);
  const double s[2] = {0.5, 0.5};
  const double a[2] = {0.0, 1.0};
  double r = -1;
  REQUIRE(clue_labeler_reward(lab, s, a, &r) == CLUE_OK);
  CHECK(r >= 0.0);
  CHECK(r <= 1.0);
  double mean[4], stdv[4];
  REQUIRE(clue_cvae_encode(model, s, a, mean, stdv) == CLUE_OK);
  for (double x : stdv) CHECK(x > 0.0);

  clue_agent* agent = nullptr;
  REQUIRE(clue_agent_load((out / "agent.ckpt").string().c_str(), &agent) == CLUE_OK);
  double act[2] = {9, 9};
  REQUIRE(clue_agent_act(agent, s, act) == CLUE_OK);
  CHECK(std::abs(act[0]) <= 1.0);
  CHECK(std::abs(act[1]) <= 1.0);

  clue_agent_free(agent);
  clue_labeler_free(lab);
  clue_dataset_free(expert);
  clue_dataset_free(d);
  clue_cvae_free(model);
  fs::remove_all(out);
}
