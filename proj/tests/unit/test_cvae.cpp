#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "clue/cvae/cvae.hpp"
#include "clue/envs/rollout.hpp"
#include "clue/error.hpp"
#include "support/grad_cases.hpp"

using namespace clue;
using namespace clue::cvae;
using nn::Activation;
using nn::Dense;

namespace {

Matrix mat(Eigen::Index r, Eigen::Index c, std::initializer_list<double> xs) {
  Matrix m(r, c);
  Eigen::Index i = 0;
  for (double x : xs) {
    m(i / c, i % c) = x;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// One-dimensional state, action and latent with single linear layers, so
// every quantity can be written out by hand.
CvaeModel hand_model() {
  CvaeModel m;
  m.state_dim = 1;
  m.action_dim = 1;
  m.latent_dim = 1;
  m.decoder_std = 0.5;
  m.calibration_weight = 0.3;
  m.encoder = nn::Mlp({Dense{mat(2, 2, {0.5, -1.0, 0.25, 2.0}), vec({0.1, -0.3})}}, Activation::relu,
                      Activation::identity);
  m.decoder = nn::Mlp({Dense{mat(1, 2, {1.5, -0.5}), vec({0.2})}}, Activation::relu, Activation::identity);
  m.state_stats = {vec({1.0}), vec({2.0})};
  return m;
}

}  // namespace

TEST_SUITE("cvae") {
  TEST_CASE("KL of the standard normal to itself is zero") {
    CHECK(kl_to_standard_normal({vec({0.0, 0.0}), vec({1.0, 1.0})}) == 0.0);
  }

  TEST_CASE("KL with mean 1 and std 1 is one half") {
    CHECK(std::abs(kl_to_standard_normal({vec({1.0}), vec({1.0})}) - 0.5) <= 1e-12);
  }

  TEST_CASE("KL grows with the std away from one") {
    const double kl = kl_to_standard_normal({vec({0.0}), vec({2.0})});
    CHECK(kl == doctest::Approx(0.5 * (4.0 - std::log(4.0) - 1.0)));
  }

  TEST_CASE("hand-built encoder gives the computed posterior") {
    const auto m = hand_model();
    // s = 3 normalizes to 1; mean = 0.5 - 0.5 + 0.1, log std = 0.25 + 1 - 0.3.
    const auto g = encode(m, vec({3.0}), vec({0.5}));
    CHECK(std::abs(g.mean[0] - 0.1) < 1e-15);
    CHECK(std::abs(g.std[0] - std::exp(0.95)) < 1e-14);
  }

  TEST_CASE("log std is clamped to [-5, 2]") {
    const auto m = hand_model();
    CHECK(encode(m, vec({3.0}), vec({3.0})).std[0] == std::exp(2.0));
    CHECK(encode(m, vec({3.0}), vec({-3.0})).std[0] == std::exp(-5.0));
  }

  TEST_CASE("ELBO of the hand model matches a written-out sum") {
    const auto m = hand_model();
    const double eps = 0.4;
    const auto parts = elbo_loss(m, mat(1, 1, {3.0}), mat(1, 1, {0.5}), {mat(1, 1, {eps})});
    const double mu = 0.1, sd = std::exp(0.95);
    const double z = mu + sd * eps;
    const double a_hat = 1.5 * z - 0.5 * 1.0 + 0.2;
    const double rec = 0.5 * (a_hat - 0.5) * (a_hat - 0.5) / 0.25;
    const double kl = 0.5 * (mu * mu + sd * sd - 2.0 * 0.95 - 1.0);
    CHECK(std::abs(parts.kl - kl) < 1e-12);
    CHECK(std::abs(parts.reconstruction - rec) < 1e-12);
    CHECK(std::abs(parts.loss - (kl + rec)) < 1e-12);
  }

  TEST_CASE("ELBO samples are averaged") {
    const auto m = hand_model();
    const Matrix s = mat(1, 1, {3.0}), a = mat(1, 1, {0.5});
    const double one = elbo_loss(m, s, a, {mat(1, 1, {0.4})}).reconstruction;
    const double two = elbo_loss(m, s, a, {mat(1, 1, {-1.0})}).reconstruction;
    const double both = elbo_loss(m, s, a, {mat(1, 1, {0.4}), mat(1, 1, {-1.0})}).reconstruction;
    CHECK(both == doctest::Approx(0.5 * (one + two)).epsilon(1e-14));
  }

  TEST_CASE("calibration of the hand model is |mean|^2 + |std|^2") {
    const auto m = hand_model();
    const double c = calibration_loss(m, mat(2, 1, {3.0, 1.0}), mat(2, 1, {0.5, 0.0}));
    // Second row: s normalizes to 0, mean = 0.1, log std = -0.3.
    const double row1 = 0.01 + std::exp(1.9);
    const double row2 = 0.01 + std::exp(-0.6);
    CHECK(std::abs(c - 0.5 * (row1 + row2)) < 1e-12);
  }

  TEST_CASE("total loss adds the weighted calibration term") {
    const auto m = hand_model();
    const Matrix s = mat(1, 1, {3.0}), a = mat(1, 1, {0.5});
    const std::vector<Matrix> noise{mat(1, 1, {0.4})};
    const auto t = total_loss(m, s, a, noise, s, a);
    CHECK(t.total == doctest::Approx(t.elbo.loss + 0.3 * t.calibration).epsilon(1e-14));
  }

  TEST_CASE("with zero weight the expert batch is ignored") {
    auto m = hand_model();
    m.calibration_weight = 0.0;
    const Matrix s = mat(1, 1, {3.0}), a = mat(1, 1, {0.5});
    const auto t = total_loss(m, s, a, {mat(1, 1, {0.4})}, Matrix(0, 1), Matrix(0, 1));
    CHECK(t.total == t.elbo.loss);
    CHECK(t.calibration == 0.0);
  }

  TEST_CASE("reparameterization is mean plus std times noise") {
    LatentBatch g{mat(2, 2, {1.0, -1.0, 0.0, 2.0}), mat(2, 2, {0.5, 2.0, 1.0, 0.25}), Matrix::Zero(2, 2)};
    const Matrix z = reparameterize(g, mat(2, 2, {2.0, 0.5, -1.0, 4.0}));
    CHECK(z == mat(2, 2, {2.0, 0.0, -1.0, 3.0}));
  }

  TEST_CASE("default latent size is twice the action size") {
    Rng rng(1);
    const auto m = CvaeModel::create(5, 3, CvaeConfig{}, rng);
    CHECK(m.latent_dim == 6);
    CHECK(m.encoder.output_size() == 12);
    CHECK(m.decoder.input_size() == 11);
    CHECK(m.decoder.output_size() == 3);
  }

  TEST_CASE("bad configuration is rejected") {
    Rng rng(1);
    CvaeConfig cfg;
    cfg.decoder_std = 0.0;
    CHECK_THROWS_AS(CvaeModel::create(2, 2, cfg, rng), Error);
    cfg = {};
    cfg.calibration_weight = -1.0;
    CHECK_THROWS_AS(CvaeModel::create(2, 2, cfg, rng), Error);
  }

  TEST_CASE("ELBO gradients match central differences at 10 seeds") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const double e = clue::testing::elbo_grad_error(seed);
      CHECK_MESSAGE(e < 1e-4, "seed " << seed << " error " << e);
    }
  }

  TEST_CASE("calibration gradients match central differences at 10 seeds") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const double e = clue::testing::calibration_grad_error(seed);
      CHECK_MESSAGE(e < 1e-4, "seed " << seed << " error " << e);
    }
  }

  TEST_CASE("non-finite weights surface as divergence") {
    auto m = hand_model();
    m.encoder.layers()[0].bias[0] = std::nan("");
    try {
      elbo_loss(m, mat(1, 1, {3.0}), mat(1, 1, {0.5}), {mat(1, 1, {0.4})});
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::training_diverged);
    }
  }

  TEST_CASE("training lowers the objective and calibration pulls experts together") {
    const auto maze = env::PointMaze::load(std::filesystem::path(CLUE_SOURCE_DIR) / "layouts/umaze.json");
    Rng drng(2, 1);
    const auto mixed = env::generate_dataset(maze, env::parse_mixture("expert:0.2,random:0.8"), 20, drng);
    const auto expert = data::filter_expert_by_success(mixed, 2).expert;
    CvaeConfig cfg;
    cfg.hidden = {32, 32};
    cfg.iterations = 400;
    cfg.learning_rate = 1e-3;
    cfg.decoder_std = 0.2;
    double spread[2];
    for (int i = 0; i < 2; ++i) {
      cfg.calibration_weight = i == 0 ? 0.0 : 1.0;
      Rng init(2, 2), train_rng(2, 3);
      auto m = CvaeModel::create(2, 2, cfg, init);
      const auto report = train(m, mixed, expert, cfg, train_rng);
      REQUIRE(report.iterations() == 400);
      CHECK_FALSE(report.diverged);
      double head = 0.0, tail = 0.0;
      for (int k = 0; k < 50; ++k) {
        head += report.elbo[static_cast<std::size_t>(k)];
        tail += report.elbo[report.iterations() - 1 - static_cast<std::size_t>(k)];
      }
      CHECK(tail > head);
      spread[i] = report.expert_spread;
    }
    CHECK(spread[1] < spread[0]);
  }

  TEST_CASE("training is seeded") {
    const auto maze = env::PointMaze::load(std::filesystem::path(CLUE_SOURCE_DIR) / "layouts/umaze.json");
    Rng drng(4, 1);
    const auto mixed = env::generate_dataset(maze, env::parse_mixture("expert:0.5,random:0.5"), 4, drng);
    const auto expert = data::filter_expert_by_success(mixed, 1).expert;
    CvaeConfig cfg;
    cfg.hidden = {16};
    cfg.iterations = 30;
    auto run = [&] {
      Rng init(4, 2), tr(4, 3);
      auto m = CvaeModel::create(2, 2, cfg, init);
      train(m, mixed, expert, cfg, tr);
      return m;
    };
    const auto a = run(), b = run();
    CHECK(a.encoder.layers()[0].weight == b.encoder.layers()[0].weight);
    CHECK(a.decoder.layers()[1].bias == b.decoder.layers()[1].bias);
  }

  TEST_CASE("checkpoint round trip keeps the encoder exact") {
    Rng rng(8);
    CvaeConfig cfg;
    cfg.hidden = {8};
    cfg.decoder_std = 0.3;
    cfg.calibration_weight = 0.4;
    auto m = CvaeModel::create(2, 2, cfg, rng);
    m.state_stats = {vec({0.5, 1.5}), vec({2.0, 0.75})};
    const auto dir = std::filesystem::temp_directory_path() / "clue_unit_cvae";
    save_model(m, dir / "m.ckpt", 6.0);
    const auto back = load_model(dir / "m.ckpt");
    const auto s = vec({0.3, -1.2}), a = vec({0.9, -0.1});
    CHECK(encode(back, s, a).mean == encode(m, s, a).mean);
    CHECK(encode(back, s, a).std == encode(m, s, a).std);
    CHECK(back.decoder_std == 0.3);
    CHECK(back.calibration_weight == 0.4);
    std::ifstream side(dir / "m.ckpt.json");
    const auto j = nlohmann::json::parse(side);
    CHECK(j.at("c_default").get<double>() == 6.0);
    CHECK(j.at("latent_dim").get<int>() == 4);
  }

  TEST_CASE("a missing sidecar is an i/o error") {
    Rng rng(8);
    auto m = CvaeModel::create(2, 2, CvaeConfig{}, rng);
    const auto dir = std::filesystem::temp_directory_path() / "clue_unit_cvae";
    save_model(m, dir / "lonely.ckpt", 1.0);
    std::filesystem::remove(dir / "lonely.ckpt.json");
    try {
      load_model(dir / "lonely.ckpt");
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::io_error);
    }
  }

  TEST_CASE("mean pairwise distance of a right triangle") {
    CHECK(mean_pairwise_distance(mat(3, 2, {0, 0, 3, 0, 0, 4})) == doctest::Approx((3.0 + 4.0 + 5.0) / 3.0));
    CHECK(mean_pairwise_distance(mat(1, 2, {1, 1})) == 0.0);
  }
}
