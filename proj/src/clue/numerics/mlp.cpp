#include "clue/numerics/mlp.hpp"

#include <cmath>
#include <string>

#include "clue/error.hpp"

namespace clue::nn {

namespace {

void apply(Activation a, Matrix& m) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::tanh: m = m.array().tanh().matrix(); break;
  }
}

// Derivative expressed through the activation's output value.
void scale_by_derivative(Activation a, const Matrix& out, Matrix& grad) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: grad = grad.cwiseProduct((out.array() > 0.0).cast<double>().matrix()); break;
    case Activation::tanh: grad = grad.cwiseProduct((1.0 - out.array().square()).matrix()); break;
  }
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  fail(ErrorCode::parse_error, "unknown activation '" + name + "'");
}

ParamViews MlpGradients::views() {
  ParamViews v;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    v.emplace_back(weight[i].data(), static_cast<std::size_t>(weight[i].size()));
    v.emplace_back(bias[i].data(), static_cast<std::size_t>(bias[i].size()));
  }
  return v;
}

ConstParamViews MlpGradients::views() const {
  ConstParamViews v;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    v.emplace_back(weight[i].data(), static_cast<std::size_t>(weight[i].size()));
    v.emplace_back(bias[i].data(), static_cast<std::size_t>(bias[i].size()));
  }
  return v;
}

void MlpGradients::add(const MlpGradients& other, double scale) {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] += scale * other.weight[i];
    bias[i] += scale * other.bias[i];
  }
}

bool MlpGradients::all_zero() const {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    if (!weight[i].isZero(0.0) || !bias[i].isZero(0.0)) return false;
  }
  return true;
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output)
    : hidden_(hidden), output_(output) {
  require(layer_sizes.size() >= 2, "an Mlp needs at least an input and an output size");
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(layer_sizes[i]);
    const auto out = static_cast<Eigen::Index>(layer_sizes[i + 1]);
    layers_.push_back(Dense{Matrix::Zero(out, in), Vector::Zero(out)});
  }
}

Mlp::Mlp(std::vector<Dense> layers, Activation hidden, Activation output)
    : layers_(std::move(layers)), hidden_(hidden), output_(output) {
  require(!layers_.empty(), "an Mlp needs at least one layer");
  check_shapes();
}

Mlp Mlp::initialized(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output, Rng& rng) {
  Mlp net(std::move(layer_sizes), hidden, output);
  for (auto& layer : net.layers_) {
    const double bound = layer.in() > 0 ? 1.0 / std::sqrt(static_cast<double>(layer.in())) : 0.0;
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.uniform(-bound, bound);
  }
  return net;
}

void Mlp::check_shapes() const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    require(static_cast<std::size_t>(layers_[i].bias.size()) == layers_[i].out(), "bias length must match layer output");
    if (i > 0) require(layers_[i].in() == layers_[i - 1].out(), "consecutive layer shapes do not compose");
  }
}

std::size_t Mlp::input_size() const { return layers_.empty() ? 0 : layers_.front().in(); }
std::size_t Mlp::output_size() const { return layers_.empty() ? 0 : layers_.back().out(); }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.in() * l.out() + l.out();
  return n;
}

std::vector<std::size_t> Mlp::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(layers_.front().in());
  for (const auto& l : layers_) sizes.push_back(l.out());
  return sizes;
}

Vector Mlp::forward(const Vector& input) const {
  Matrix batch = input.transpose();
  return forward(batch).row(0).transpose();
}

Matrix Mlp::forward(const Matrix& batch) const {
  require(static_cast<std::size_t>(batch.cols()) == input_size(),
          "input width " + std::to_string(batch.cols()) + " does not match network input " +
              std::to_string(input_size()));
  Matrix x = batch;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix y = x * layers_[l].weight.transpose();
    y.rowwise() += layers_[l].bias.transpose();
    apply(l + 1 == layers_.size() ? output_ : hidden_, y);
    x = std::move(y);
  }
  return x;
}

Matrix Mlp::forward(const Matrix& batch, Tape& tape, double dropout, Rng* rng) const {
  require(static_cast<std::size_t>(batch.cols()) == input_size(),
          "input width " + std::to_string(batch.cols()) + " does not match network input " +
              std::to_string(input_size()));
  require(dropout == 0.0 || (dropout > 0.0 && dropout < 1.0 && rng != nullptr),
          "dropout needs a rate in (0,1) and a generator");
  tape.input = batch;
  tape.outputs.clear();
  tape.masks.clear();
  const double keep_scale = dropout > 0.0 ? 1.0 / (1.0 - dropout) : 1.0;
  Matrix x = batch;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const bool last = l + 1 == layers_.size();
    Matrix y = x * layers_[l].weight.transpose();
    y.rowwise() += layers_[l].bias.transpose();
    apply(last ? output_ : hidden_, y);
    tape.outputs.push_back(y);
    if (!last && dropout > 0.0) {
      Matrix mask(y.rows(), y.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->uniform() < dropout ? 0.0 : keep_scale;
      y = y.cwiseProduct(mask);
      tape.masks.push_back(std::move(mask));
    }
    x = std::move(y);
  }
  return x;
}

MlpGradients Mlp::backward(const Tape& tape, const Matrix& output_grad, Matrix* input_grad) const {
  require(tape.outputs.size() == layers_.size(), "tape does not belong to this network");
  require(output_grad.rows() == tape.output().rows() && output_grad.cols() == tape.output().cols(),
          "output gradient shape does not match forward output");
  MlpGradients g = zero_gradients();
  Matrix delta = output_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const bool last = l + 1 == layers_.size();
    scale_by_derivative(last ? output_ : hidden_, tape.outputs[l], delta);
    const Matrix& x = l == 0 ? tape.input : tape.outputs[l - 1];
    if (l > 0 && !tape.masks.empty()) {
      const Matrix dropped = x.cwiseProduct(tape.masks[l - 1]);
      g.weight[l].noalias() = delta.transpose() * dropped;
    } else {
      g.weight[l].noalias() = delta.transpose() * x;
    }
    g.bias[l] = delta.colwise().sum().transpose();
    if (l > 0 || input_grad != nullptr) {
      Matrix next = delta * layers_[l].weight;
      if (l > 0 && !tape.masks.empty()) next = next.cwiseProduct(tape.masks[l - 1]);
      if (l == 0) {
        *input_grad = std::move(next);
      } else {
        delta = std::move(next);
      }
    }
  }
  return g;
}

Mlp::SampleGradients Mlp::backward(const Vector& input, const Vector& output_grad) const {
  require(static_cast<std::size_t>(output_grad.size()) == output_size(), "output gradient length mismatch");
  Tape tape;
  forward(Matrix(input.transpose()), tape);
  Matrix input_grad;
  auto params = backward(tape, Matrix(output_grad.transpose()), &input_grad);
  return {std::move(params), input_grad.row(0).transpose()};
}

MlpGradients Mlp::zero_gradients() const {
  MlpGradients g;
  for (const auto& l : layers_) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

ParamViews Mlp::parameters() {
  ParamViews v;
  for (auto& l : layers_) {
    v.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    v.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return v;
}

ConstParamViews Mlp::parameters() const {
  ConstParamViews v;
  for (const auto& l : layers_) {
    v.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    v.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return v;
}

}  // namespace clue::nn
