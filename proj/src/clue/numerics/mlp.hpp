#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clue/rng.hpp"

namespace clue::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Activation { identity, relu, tanh };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

// One affine layer: y = W x + b with W stored out x in.
struct Dense {
  Matrix weight;
  Vector bias;

  std::size_t in() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(weight.rows()); }
};

using ParamViews = std::vector<std::span<double>>;
using ConstParamViews = std::vector<std::span<const double>>;

// Gradients with the exact shapes of an Mlp's parameters.
struct MlpGradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  ParamViews views();
  ConstParamViews views() const;
  void add(const MlpGradients& other, double scale = 1.0);
  bool all_zero() const;
};

// Intermediate values recorded by a batched forward pass. outputs[l] is the
// post-activation output of layer l before any dropout mask is applied.
struct Tape {
  Matrix input;
  std::vector<Matrix> outputs;
  std::vector<Matrix> masks;  // empty when dropout is off

  const Matrix& output() const { return outputs.back(); }
};

class Mlp {
 public:
  Mlp() = default;
  // Zero-initialized network.
  Mlp(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output);
  Mlp(std::vector<Dense> layers, Activation hidden, Activation output);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static Mlp initialized(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output,
                         Rng& rng);

  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t parameter_count() const;
  std::vector<std::size_t> layer_sizes() const;

  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }

  const std::vector<Dense>& layers() const { return layers_; }
  std::vector<Dense>& layers() { return layers_; }

  Vector forward(const Vector& input) const;
  // Rows are samples.
  Matrix forward(const Matrix& batch) const;
  Matrix forward(const Matrix& batch, Tape& tape, double dropout = 0.0, Rng* rng = nullptr) const;

  // Reverse pass over a recorded tape. output_grad is dLoss/dOutput, one row
  // per sample; gradients are summed over rows.
  MlpGradients backward(const Tape& tape, const Matrix& output_grad, Matrix* input_grad = nullptr) const;

  struct SampleGradients {
    MlpGradients params;
    Vector input_grad;
  };
  SampleGradients backward(const Vector& input, const Vector& output_grad) const;

  MlpGradients zero_gradients() const;
  ParamViews parameters();
  ConstParamViews parameters() const;

 private:
  void check_shapes() const;

  std::vector<Dense> layers_;
  Activation hidden_ = Activation::relu;
  Activation output_ = Activation::identity;
};

}  // namespace clue::nn
