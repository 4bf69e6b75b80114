#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "clue/error.hpp"
#include "clue/numerics/adam.hpp"
#include "clue/numerics/checkpoint.hpp"
#include "clue/numerics/grad_check.hpp"
#include "clue/numerics/mlp.hpp"

using namespace clue;
using namespace clue::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

// Straight-line scalar forward pass used as an oracle.
std::vector<double> scalar_forward(const Mlp& net, const std::vector<double>& x) {
  std::vector<double> h = x;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<double> next(layers[l].out(), 0.0);
    for (std::size_t o = 0; o < layers[l].out(); ++o) {
      double acc = layers[l].bias[o];
      for (std::size_t i = 0; i < layers[l].in(); ++i) acc += layers[l].weight(o, i) * h[i];
      const bool last = l + 1 == layers.size();
      const Activation a = last ? net.output_activation() : net.hidden_activation();
      if (a == Activation::relu) acc = acc > 0.0 ? acc : 0.0;
      if (a == Activation::tanh) acc = std::tanh(acc);
      next[o] = acc;
    }
    h = next;
  }
  return h;
}

}  // namespace

TEST_SUITE("numerics") {
  TEST_CASE("single linear layer maps 3 to 7") {
    Dense d{Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 1.0)};
    Mlp net({d}, Activation::relu, Activation::identity);
    Vector x(1);
    x << 3.0;
    CHECK(net.forward(x)[0] == 7.0);
  }

  TEST_CASE("zero-weight network returns its bias") {
    Mlp net({3, 4, 2}, Activation::relu, Activation::identity);
    net.layers()[1].bias << 0.25, -1.5;
    Vector x(3);
    x << 5, -2, 9;
    const Vector y = net.forward(x);
    CHECK(y[0] == 0.25);
    CHECK(y[1] == -1.5);
  }

  TEST_CASE("seeded two-layer net matches scalar oracle") {
    for (auto out : {Activation::identity, Activation::tanh}) {
      Rng rng(11);
      Mlp net = Mlp::initialized({4, 6, 3}, Activation::relu, out, rng);
      Vector x(4);
      x << 0.3, -0.7, 1.2, 0.05;
      const Vector y = net.forward(x);
      const auto oracle = scalar_forward(net, {0.3, -0.7, 1.2, 0.05});
      for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(oracle[i]).epsilon(1e-14));
    }
  }

  TEST_CASE("parameter count follows layer sizes") {
    Mlp net({5, 7, 3, 2}, Activation::relu, Activation::identity);
    CHECK(net.parameter_count() == 5 * 7 + 7 + 7 * 3 + 3 + 3 * 2 + 2);
  }

  TEST_CASE("dimension mismatch is an invalid argument") {
    Mlp net({3, 2}, Activation::relu, Activation::identity);
    try {
      net.forward(Vector(Vector::Zero(4)));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_argument);
    }
    CHECK_THROWS_AS(net.backward(Vector(Vector::Zero(3)), Vector(Vector::Zero(3))), Error);
  }

  TEST_CASE("linear layer with loss = output has weight grad equal to input") {
    Mlp net({3, 1}, Activation::relu, Activation::identity);
    Vector x(3);
    x << 1.5, -2.0, 0.5;
    const auto g = net.backward(x, Vector::Ones(1));
    for (int i = 0; i < 3; ++i) CHECK(g.params.weight[0](0, i) == x[i]);
    CHECK(g.params.bias[0][0] == 1.0);
  }

  TEST_CASE("zero output gradient gives zero gradients") {
    Rng rng(3);
    Mlp net = Mlp::initialized({3, 5, 2}, Activation::relu, Activation::tanh, rng);
    const auto g = net.backward(Vector::Ones(3), Vector::Zero(2));
    CHECK(g.params.all_zero());
    CHECK(g.input_grad.isZero(0.0));
  }

  TEST_CASE("backward is pure and deterministic") {
    Rng rng(4);
    Mlp net = Mlp::initialized({3, 8, 8, 2}, Activation::relu, Activation::identity, rng);
    const auto before = net.layers()[0].weight;
    Vector x(3), g(2);
    x << 0.1, 0.2, -0.3;
    g << 1.0, -2.0;
    const auto a = net.backward(x, g);
    const auto b = net.backward(x, g);
    CHECK(net.layers()[0].weight == before);
    for (std::size_t l = 0; l < a.params.weight.size(); ++l) CHECK(a.params.weight[l] == b.params.weight[l]);
    CHECK(a.input_grad == b.input_grad);
  }

  TEST_CASE("three-layer relu net gradients match central differences") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(seed);
      Mlp net = Mlp::initialized({4, 16, 16, 3}, Activation::relu, Activation::tanh, rng);
      const Matrix x = random_matrix(5, 4, rng);
      const Matrix target = random_matrix(5, 3, rng);
      const auto report = grad_check(net, x, [&](const Matrix& y, Matrix& grad) {
        grad = y - target;
        return 0.5 * (y - target).squaredNorm();
      });
      CHECK_MESSAGE(report.passed(), "seed " << seed << " max error " << report.max_error());
    }
  }

  TEST_CASE("linear regression grad check is tight") {
    Rng rng(2);
    Mlp net = Mlp::initialized({3, 1}, Activation::relu, Activation::identity, rng);
    const Matrix x = random_matrix(8, 3, rng);
    const Matrix y = random_matrix(8, 1, rng);
    const auto report = grad_check(net, x, [&](const Matrix& out, Matrix& grad) {
      grad = out - y;
      return 0.5 * (out - y).squaredNorm();
    });
    CHECK(report.max_error() < 1e-6);
  }

  TEST_CASE("constant loss gives zero analytic and numeric gradients") {
    Rng rng(2);
    Mlp net = Mlp::initialized({2, 2}, Activation::relu, Activation::identity, rng);
    const auto report = grad_check(net, Matrix::Ones(2, 2), [](const Matrix& out, Matrix& grad) {
      grad = Matrix::Zero(out.rows(), out.cols());
      return 4.0;
    });
    CHECK(report.max_error() == 0.0);
  }

  TEST_CASE("relative error floors tiny magnitudes") {
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
    CHECK(relative_error(1e-9, 0.0) == doctest::Approx(1e-3));
  }

  TEST_CASE("adam with zero gradient leaves parameters unchanged") {
    std::vector<double> p{1.0, -2.0, 3.0};
    std::vector<double> g{0.0, 0.0, 0.0};
    AdamState st;
    for (int i = 0; i < 5; ++i) adam_step({std::span<double>(p)}, {std::span<const double>(g)}, st);
    CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
    CHECK(st.step == 5);
  }

  TEST_CASE("adam first step moves by lr against the gradient sign") {
    std::vector<double> p{0.0, 0.0};
    std::vector<double> g{0.3, -7.0};
    AdamState st(AdamConfig{0.01});
    adam_step({std::span<double>(p)}, {std::span<const double>(g)}, st);
    CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(st.first_moment.size() == 1);
    CHECK(st.first_moment[0].size() == 2);
  }

  TEST_CASE("adam converges on a quadratic") {
    std::vector<double> x{0.0};
    AdamState st(AdamConfig{0.1});
    for (int i = 0; i < 200; ++i) {
      std::vector<double> g{2.0 * (x[0] - 3.0)};
      adam_step({std::span<double>(x)}, {std::span<const double>(g)}, st);
    }
    // Observed |x - 3| is well inside the bound after 200 steps at lr 0.1.
    CHECK(std::abs(x[0] - 3.0) < 1e-3);
  }

  TEST_CASE("adam rejects non-finite gradients without touching parameters") {
    std::vector<double> p{1.0, 2.0};
    std::vector<double> g{0.5, std::nan("")};
    AdamState st;
    try {
      adam_step({std::span<double>(p)}, {std::span<const double>(g)}, st);
      FAIL("expected divergence");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::training_diverged);
    }
    CHECK(p == std::vector<double>{1.0, 2.0});
    CHECK(st.step == 0);
  }

  TEST_CASE("checkpoint round trip is bit exact") {
    Rng rng(9);
    Mlp net = Mlp::initialized({3, 4, 2}, Activation::relu, Activation::identity, rng);
    Vector v(3);
    v << 0.1, -0.2, 1e-300;
    const auto path = std::filesystem::temp_directory_path() / "clue_ckpt_roundtrip.bin";
    save_checkpoint(path, {net.layers(), vector_record(v)});
    const auto back = load_checkpoint(path);
    REQUIRE(back.size() == 2);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      CHECK(back[0][l].weight == net.layers()[l].weight);
      CHECK(back[0][l].bias == net.layers()[l].bias);
    }
    CHECK(vector_from_record(back[1]) == v);
  }

  TEST_CASE("checkpoint layout is the documented byte format") {
    Dense d{Matrix::Constant(1, 2, 0.5), Vector::Constant(1, -1.0)};
    std::ostringstream os;
    write_record(os, {d});
    const std::string bytes = os.str();
    REQUIRE(bytes.size() == 8 + 4 + 8 + 3 * 8);
    CHECK(bytes.substr(0, 8) == std::string("CLUENN1\0", 8));
    std::uint32_t count = 0, in = 0, out = 0;
    std::memcpy(&count, bytes.data() + 8, 4);
    std::memcpy(&in, bytes.data() + 12, 4);
    std::memcpy(&out, bytes.data() + 16, 4);
    CHECK(count == 1);
    CHECK(in == 2);
    CHECK(out == 1);
    double w0 = 0, b0 = 0;
    std::memcpy(&w0, bytes.data() + 20, 8);
    std::memcpy(&b0, bytes.data() + 36, 8);
    CHECK(w0 == 0.5);
    CHECK(b0 == -1.0);
  }

  TEST_CASE("corrupt checkpoint is a parse error") {
    std::istringstream is(std::string("NOTMAGIC\1\0\0\0", 12));
    try {
      read_record(is);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::parse_error);
    }
    std::istringstream truncated(std::string("CLUENN1\0\1\0\0\0\2\0\0\0", 16));
    CHECK_THROWS_AS(read_record(truncated), Error);
  }
}
