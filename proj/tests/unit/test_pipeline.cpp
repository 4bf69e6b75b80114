#include <doctest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "clue/error.hpp"
#include "clue/pipeline/commands.hpp"

using namespace clue;
using namespace clue::pipeline;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::partial_failure;  // sentinel: nothing thrown
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("clue_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig tiny_run(const fs::path& out) {
  Json file = {{"env", {{"layout", std::string(CLUE_SOURCE_DIR) + "/layouts/umaze.json"}}},
               {"output_dir", out.string()},
               {"gen", {{"episodes", 12}, {"mix", "expert:0.25,random:0.75"}}},
               {"cvae", {{"hidden", {16, 16}}, {"iterations", 40}, {"batch_size", 32}}},
               {"iql", {{"hidden", {16, 16}}, {"steps", 40}, {"batch_size", 32}}},
               {"eval", {{"seeds", 2}, {"episodes", 2}}}};
  return RunConfig::from_json(resolve_config(file, Json::object(), 3));
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("defaults, then file, then overrides") {
    const Json file = {{"seed", 4}, {"cvae", {{"lambda", 0.3}, {"iterations", 50}}}};
    const Json over = {{"cvae", {{"lambda", 0.6}}}};
    const Json r = resolve_config(file, over);
    CHECK(r["seed"] == 4);
    CHECK(r["cvae"]["lambda"] == 0.6);
    CHECK(r["cvae"]["iterations"] == 50);
    CHECK(r["cvae"]["batch_size"] == default_config()["cvae"]["batch_size"]);
    CHECK(r["iql"]["expectile"] == 0.7);
  }

  TEST_CASE("fallback seed sits below file and overrides") {
    CHECK(resolve_config(Json::object(), Json::object(), 9)["seed"] == 9);
    CHECK(resolve_config(Json{{"seed", 2}}, Json::object(), 9)["seed"] == 2);
    CHECK(resolve_config(Json{{"seed", 2}}, Json{{"seed", 5}}, 9)["seed"] == 5);
  }

  TEST_CASE("a missing seed is a validation error") {
    CHECK(code_of([] { resolve_config(Json::object(), Json::object()); }) == ErrorCode::validation_error);
  }

  TEST_CASE("unknown keys are rejected") {
    CHECK(code_of([] { resolve_config(Json{{"seeed", 1}}, Json::object(), 1); }) == ErrorCode::validation_error);
    CHECK(code_of([] { resolve_config(Json::object(), Json{{"cvae", {{"lamda", 0.1}}}}, 1); }) ==
          ErrorCode::validation_error);
  }

  TEST_CASE("bad values are validation errors") {
    for (const Json& bad : {Json{{"cvae", {{"lambda", -1.0}}}}, Json{{"reward", {{"c", 0.0}}}},
                            Json{{"pipeline", "dense"}}, Json{{"iql", {{"steps", "many"}}}},
                            Json{{"data", {{"fraction", 1.5}}}}, Json{{"iql", {{"reward_scaling", "log"}}}},
                            Json{{"reward", {{"sampling_mode", "mode"}}}}}) {
      CHECK(code_of([&] { resolve_config(bad, Json::object(), 1); }) == ErrorCode::validation_error);
    }
  }

  TEST_CASE("resolved config round trips") {
    const Json r = resolve_config(Json{{"seed", 1}, {"skills", {{"k", 3}}}}, Json::object());
    CHECK(RunConfig::from_json(r).to_json() == r);
    CHECK(RunConfig::from_json(r).skills.k == 3);
  }

  TEST_CASE("mixed union puts the expert last unless excluded") {
    data::Trajectory a, b;
    a.observations = {Vector::Zero(1), Vector::Ones(1)};
    a.actions = {Vector::Ones(1)};
    a.terminals = {true};
    b = a;
    b.observations[1] *= 2.0;
    const auto rest = data::Dataset::from_trajectories({a});
    const auto expert = data::Dataset::from_trajectories({b});
    const auto u = mixed_union(rest, expert, false);
    REQUIRE(u.trajectories.size() == 2);
    CHECK(u.trajectories[1].observations == b.observations);
    CHECK(mixed_union(rest, expert, true).trajectories.size() == 1);
  }

  TEST_CASE("csv helpers") {
    CHECK(reward_histogram_csv({0.0, 0.49, 0.5, 1.0}, 2) == "bin_lo,bin_hi,count\n0,0.5,2\n0.5,1,2\n");
    env::EvalSummary s;
    s.mean_return = 0.5;
    s.success_rate = 0.25;
    CHECK(scores_csv(7, {s, s}) == "seed,mean_return,success_rate\n7,0.5,0.25\n8,0.5,0.25\n");
  }

  TEST_CASE("unknown command") {
    const auto c = tiny_run(scratch("unknown"));
    CHECK(code_of([&] { run_command("fly", c); }) == ErrorCode::invalid_argument);
  }

  TEST_CASE("gen-data, train-cvae, relabel, train and eval chain together") {
    const fs::path out = scratch("chain");
    auto c = tiny_run(out);
    run_command("gen-data", c);
    REQUIRE(fs::exists(out / "dataset.jsonl"));
    CHECK(fs::exists(out / "config.json"));
    const auto d = data::load(out / "dataset.jsonl");
    CHECK(d.trajectories.size() == 12);

    c.data.dataset = (out / "dataset.jsonl").string();
    run_command("train-cvae", c);
    CHECK(fs::exists(out / "cvae.ckpt"));
    CHECK(fs::exists(out / "cvae.ckpt.json"));

    c.cvae_checkpoint = (out / "cvae.ckpt").string();
    run_command("relabel", c);
    const auto r = data::load(out / "relabeled.jsonl");
    CHECK(r.transition_count() == d.transition_count());
    CHECK(r.trajectories[0].original_rewards.has_value());

    c.data.dataset = (out / "relabeled.jsonl").string();
    run_command("train", c);
    REQUIRE(fs::exists(out / "agent.ckpt"));
    c.agent_checkpoint = (out / "agent.ckpt").string();
    run_command("eval", c);
    const std::string scores = slurp(out / "scores.csv");
    CHECK(scores.rfind("seed,mean_return,success_rate\n", 0) == 0);
    fs::remove_all(out);
  }

  TEST_CASE("train refuses unlabeled data") {
    const fs::path out = scratch("unlabeled");
    auto c = tiny_run(out);
    run_command("gen-data", c);
    const auto d = data::strip_rewards(data::load(out / "dataset.jsonl"));
    data::save(d, out / "bare.jsonl");
    c.data.dataset = (out / "bare.jsonl").string();
    CHECK(code_of([&] { run_command("train", c); }) == ErrorCode::missing_rewards);
    fs::remove_all(out);
  }
}
