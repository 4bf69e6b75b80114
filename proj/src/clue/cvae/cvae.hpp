#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "clue/dataset/dataset.hpp"
#include "clue/numerics/adam.hpp"
#include "clue/numerics/mlp.hpp"
#include "clue/rng.hpp"

namespace clue::cvae {

using nn::Matrix;
using nn::Vector;

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct GaussianLatent {
  Vector mean;
  Vector std;
};

// Batched posterior: one row per sample.
struct LatentBatch {
  Matrix mean;
  Matrix std;
  Matrix raw_log_std;  // encoder output before clamping
};

struct CvaeConfig {
  std::size_t latent_dim = 0;  // 0 means 2 x action_dim
  std::vector<std::size_t> hidden{128, 128};
  std::size_t batch_size = 128;
  std::size_t iterations = 10000;
  double learning_rate = 1e-4;
  double calibration_weight = 0.1;
  std::size_t elbo_samples = 1;
  // Fixed std of the Gaussian action likelihood; reconstruction is
  // 0.5 |a - a_hat|^2 / decoder_std^2.
  double decoder_std = 1.0;
  bool exclude_expert_from_elbo = false;
};

// Encoder q(z|s,a) maps concat(s,a) to (mean, log std); decoder p(a|z,s) maps
// concat(z,s) to the mean of a Gaussian with std decoder_std. States are
// z-scored with `state_stats` before entering either network.
struct CvaeModel {
  nn::Mlp encoder;
  nn::Mlp decoder;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t latent_dim = 0;
  double calibration_weight = 0.1;
  std::size_t elbo_samples = 1;
  double decoder_std = 1.0;
  data::StateStats state_stats;

  static CvaeModel create(std::size_t state_dim, std::size_t action_dim, const CvaeConfig& config, Rng& rng);

  Matrix encoder_input(const Matrix& states, const Matrix& actions) const;
};

struct CvaeGradients {
  nn::MlpGradients encoder;
  nn::MlpGradients decoder;

  static CvaeGradients zeros(const CvaeModel& m);
  nn::ConstParamViews views() const;
};

nn::ParamViews parameters(CvaeModel& m);

GaussianLatent encode(const CvaeModel& m, const Vector& state, const Vector& action);
LatentBatch encode_batch(const CvaeModel& m, const Matrix& states, const Matrix& actions);

Vector reparameterize(const GaussianLatent& g, Rng& rng);
// z = mean + std * noise, row-wise.
Matrix reparameterize(const LatentBatch& g, const Matrix& noise);

double kl_to_standard_normal(const GaussianLatent& g);

Vector decode(const CvaeModel& m, const Vector& z, const Vector& state);

struct ElboParts {
  double loss = 0.0;            // kl + reconstruction = -ELBO up to a constant
  double kl = 0.0;
  double reconstruction = 0.0;  // mean over samples of 0.5 |a - a_hat|^2 / decoder_std^2
};

// Batch-mean negative ELBO with explicit standard-normal draws, one matrix
// (rows x latent_dim) per ELBO sample. Accumulates gradients when `grads` is
// non-null.
ElboParts elbo_loss(const CvaeModel& m, const Matrix& states, const Matrix& actions,
                    const std::vector<Matrix>& noise, CvaeGradients* grads = nullptr);
ElboParts elbo_loss(const CvaeModel& m, const Matrix& states, const Matrix& actions, Rng& rng,
                    CvaeGradients* grads = nullptr);

// Mean over the batch of |mean|^2 + |std|^2 of the posterior.
double calibration_loss(const CvaeModel& m, const Matrix& states, const Matrix& actions,
                        CvaeGradients* grads = nullptr, double scale = 1.0);

struct TotalLoss {
  ElboParts elbo;
  double calibration = 0.0;
  double total = 0.0;
};

// elbo(mixed) + weight * calibration(expert). With weight 0 the expert batch
// is not touched.
TotalLoss total_loss(const CvaeModel& m, const Matrix& mixed_states, const Matrix& mixed_actions,
                     const std::vector<Matrix>& noise, const Matrix& expert_states, const Matrix& expert_actions,
                     CvaeGradients* grads = nullptr);

struct CvaeTrainReport {
  std::vector<double> elbo;
  std::vector<double> kl;
  std::vector<double> reconstruction;
  std::vector<double> calibration;
  double expert_spread = 0.0;  // mean pairwise distance of expert posterior means
  Vector expert_mean_std;      // per-dimension std of expert posterior means
  bool diverged = false;
  std::string message;

  std::size_t iterations() const { return elbo.size(); }
};

// Minimizes elbo(mixed batch) + weight * calibration(expert batch), both
// batches drawn with replacement each iteration. When fit_state_stats is set
// the model's state normalization is refit from the mixed data first.
CvaeTrainReport train(CvaeModel& m, const data::Dataset& mixed, const data::Dataset& expert,
                      const CvaeConfig& config, Rng& rng, bool fit_state_stats = true);

double mean_pairwise_distance(const Matrix& points);

void save_model(const CvaeModel& m, const std::filesystem::path& ckpt, double c_default);
CvaeModel load_model(const std::filesystem::path& ckpt);

}  // namespace clue::cvae
