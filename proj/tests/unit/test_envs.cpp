#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "clue/error.hpp"
#include "clue/envs/rollout.hpp"

using namespace clue;
using namespace clue::env;

namespace {

std::string layout(const char* name) { return std::string(CLUE_SOURCE_DIR) + "/layouts/" + name + ".json"; }

Vector xy(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

// Walks the segment in tiny increments and stops before the first sample
// strictly inside a wall, then clamps to the bounds.
Vector marched(const PointMaze& m, const Vector& s, const Vector& delta) {
  const int n = 200000;
  Vector last = s;
  for (int i = 1; i <= n; ++i) {
    const Vector p = s + (static_cast<double>(i) / n) * delta;
    if (m.in_wall(p)) break;
    last = p;
  }
  last[0] = std::clamp(last[0], m.bounds().x0, m.bounds().x1);
  last[1] = std::clamp(last[1], m.bounds().y0, m.bounds().y1);
  return last;
}

}  // namespace

TEST_SUITE("envs") {
  TEST_CASE("zero action leaves the state unchanged") {
    const auto m = PointMaze::load(layout("medium"));
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
      Vector s = xy(rng.uniform(0.0, 4.0), rng.uniform(0.0, 4.0));
      if (m.in_wall(s)) continue;
      const auto r = m.step(s, Vector::Zero(2), 0);
      CHECK(r.next_state == s);
    }
  }

  TEST_CASE("segment entry on hand-worked cases") {
    const Rect r{1, 1, 2, 2};
    CHECK(segment_entry(r, 0.0, 1.5, 2.0, 0.0) == 0.5);
    CHECK(segment_entry(r, 1.5, 3.0, 0.0, -4.0) == 0.25);
    CHECK(segment_entry(r, 0.0, 0.0, 4.0, 4.0) == 0.25);
    CHECK(segment_entry(r, 0.0, 1.5, 0.5, 0.0) < 0.0);  // stops short
    CHECK(segment_entry(r, 0.0, 2.0, 3.0, 0.0) < 0.0);  // slides along the top face
    CHECK(segment_entry(r, 0.0, 3.0, 3.0, 0.0) < 0.0);  // passes above
  }

  TEST_CASE("movement stops where the segment first enters a wall") {
    const auto m = PointMaze::load(layout("medium"));
    Vector s = xy(0.95, 0.5);
    CHECK(m.move(s, xy(0.1, 0.0)) == xy(1.0, 0.5));
    s = xy(1.1, 3.05);
    CHECK(m.move(s, xy(0.0, -0.1)) == xy(1.1, 3.0));
    // Pushing into a face does not slide along it.
    s = xy(1.0, 0.5);
    CHECK(m.move(s, xy(0.1, 0.1)) == s);
  }

  TEST_CASE("collision matches a marched segment") {
    const auto m = PointMaze::load(layout("medium"));
    Rng rng(2);
    int checked = 0;
    while (checked < 150) {
      // Concentrate samples near wall faces.
      const Rect& w = m.walls()[static_cast<std::size_t>(rng.index(2))];
      const Vector s = xy(rng.uniform(w.x0 - 0.15, w.x1 + 0.15), rng.uniform(w.y0 - 0.15, w.y1 + 0.15));
      if (m.in_wall(s) || s[0] < 0 || s[1] < 0 || s[0] > 4 || s[1] > 4) continue;
      const Vector d = 0.1 * xy(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
      const Vector got = m.move(s, d);
      const Vector want = marched(m, s, d);
      CHECK((got - want).cwiseAbs().maxCoeff() < 1e-5);
      CHECK_FALSE(m.in_wall(got));
      ++checked;
    }
  }

  TEST_CASE("actions are clipped and the arena is closed") {
    const auto m = PointMaze::load(layout("umaze"));
    const auto r = m.step(xy(0.5, 0.5), xy(7.0, -3.0), 0);
    CHECK(r.next_state[0] == doctest::Approx(0.6));
    CHECK(r.next_state[1] == doctest::Approx(0.4));
    const auto edge = m.step(xy(0.05, 0.5), xy(-1.0, 0.0), 0);
    CHECK(edge.next_state[0] == 0.0);
  }

  TEST_CASE("entering the goal gives reward one and ends the episode") {
    const auto m = PointMaze::load(layout("medium"));
    const auto in = m.step(xy(3.3, 3.15), xy(0.0, 1.0), 0);
    CHECK(in.reward == 1.0);
    CHECK(in.terminal);
    CHECK(in.success);
    CHECK_FALSE(in.truncated);
    const auto out = m.step(xy(3.3, 3.1), xy(0.0, -1.0), 0);
    CHECK(out.reward == 0.0);
    CHECK_FALSE(out.terminal);
  }

  TEST_CASE("step limit truncates without a terminal") {
    const auto m = PointMaze::load(layout("medium"));
    const auto r = m.step(xy(0.5, 0.5), xy(0.0, 1.0), m.max_steps() - 1);
    CHECK(r.truncated);
    CHECK_FALSE(r.terminal);
  }

  TEST_CASE("dense reward is the negative distance to the goal centre") {
    auto m = PointMaze::load(layout("medium"));
    m.set_reward_kind(RewardKind::dense);
    const auto r = m.step(xy(0.5, 3.6), Vector::Zero(2), 0);
    CHECK(r.reward == doctest::Approx(-2.875));
  }

  TEST_CASE("layout json round trip") {
    const auto m = PointMaze::load(layout("four_goal"));
    const auto back = PointMaze::from_json(m.to_json());
    CHECK(back.to_json() == m.to_json());
    CHECK(back.goals().size() == m.goals().size());
  }

  TEST_CASE("malformed layouts are rejected") {
    CHECK_THROWS_AS(PointMaze::from_json("{"), Error);
    CHECK_THROWS_AS(PointMaze::from_json(R"({"bounds": [0, 0, 1, 1]})"), Error);
  }

  TEST_CASE("mixture grammar") {
    const auto mix = parse_mixture("expert:0.05,random@4:0.45,noisy@0.3/any:0.5");
    REQUIRE(mix.size() == 3);
    CHECK(mix[0].spec.kind == BehaviorKind::waypoint_expert);
    CHECK(mix[1].spec.kind == BehaviorKind::random);
    CHECK(mix[1].spec.hold == 4);
    CHECK(mix[2].spec.kind == BehaviorKind::noisy_expert);
    CHECK(mix[2].spec.noise == 0.3);
    CHECK_FALSE(mix[2].spec.goal_index.has_value());
    CHECK(parse_mixture("expert/2:1")[0].spec.goal_index == 2u);
    CHECK_THROWS_AS(parse_mixture("walker:1"), Error);
    CHECK_THROWS_AS(parse_mixture("expert"), Error);
    CHECK_THROWS_AS(parse_mixture("expert:0"), Error);
  }

  TEST_CASE("episodes are allocated by largest remainder") {
    const auto mix = parse_mixture("expert:0.05,random:0.95");
    CHECK(allocate_episodes(mix, 500) == std::vector<std::size_t>{25, 475});
    const auto thirds = parse_mixture("expert:0.34,random:0.33,noisy@0.1:0.33");
    const auto n = allocate_episodes(thirds, 10);
    CHECK(n[0] + n[1] + n[2] == 10);
    CHECK(n[0] == 4);
  }

  TEST_CASE("expert reaches the goal every time") {
    for (const char* name : {"umaze", "medium", "large"}) {
      const auto m = PointMaze::load(layout(name));
      Rng rng(3);
      const auto d = generate_dataset(m, BehaviorSpec{BehaviorKind::waypoint_expert}, 50, rng);
      for (const auto& t : d.trajectories) CHECK(t.success == true);
    }
  }

  TEST_CASE("random behavior rarely reaches the medium goal") {
    const auto m = PointMaze::load(layout("medium"));
    Rng rng(4);
    const auto d = generate_dataset(m, BehaviorSpec{BehaviorKind::random}, 200, rng);
    std::size_t hits = 0;
    for (const auto& t : d.trajectories) hits += *t.success ? 1 : 0;
    CHECK(static_cast<double>(hits) / 200.0 < 0.2);
  }

  TEST_CASE("generated data is consistent") {
    const auto m = PointMaze::load(layout("medium"));
    Rng rng(5);
    const auto d = generate_dataset(m, parse_mixture("expert:0.1,noisy@0.3:0.2,random:0.7"), 100, rng);
    d.validate();
    REQUIRE(d.trajectories.size() == 100);
    std::size_t wins = 0;
    for (const auto& t : d.trajectories) {
      for (const auto& s : t.observations) CHECK_FALSE(m.in_wall(s));
      REQUIRE(t.rewards.has_value());
      const bool any_one = std::find(t.rewards->begin(), t.rewards->end(), 1.0) != t.rewards->end();
      CHECK(*t.success == any_one);
      if (*t.success) {
        CHECK(t.rewards->back() == 1.0);
        CHECK(t.terminals.back());
      } else {
        CHECK(t.length() == m.max_steps());
      }
      for (std::size_t k = 0; k + 1 < t.length(); ++k) CHECK_FALSE(t.terminals[k]);
      wins += *t.success ? 1 : 0;
    }
    CHECK(wins > 0);
    CHECK(wins < 100);
  }

  TEST_CASE("generation and evaluation are seeded") {
    const auto m = PointMaze::load(layout("umaze"));
    const auto mix = parse_mixture("noisy@0.5:1");
    Rng a(6), b(6);
    CHECK(data::to_jsonl(generate_dataset(m, mix, 5, a)) == data::to_jsonl(generate_dataset(m, mix, 5, b)));

    const PolicyFn noisy = [](const Vector&, Rng& rng) { return xy(rng.normal(), rng.normal()); };
    Rng x(7), y(7);
    const auto e1 = evaluate(m, noisy, 4, x);
    const auto e2 = evaluate(m, noisy, 4, y);
    CHECK(e1.mean_return == e2.mean_return);
    REQUIRE(e1.episodes.size() == e2.episodes.size());
    for (std::size_t i = 0; i < e1.episodes.size(); ++i) CHECK(e1.episodes[i].final_state == e2.episodes[i].final_state);
  }
}
