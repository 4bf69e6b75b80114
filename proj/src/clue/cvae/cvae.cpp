#include "clue/cvae/cvae.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "clue/error.hpp"
#include "clue/numerics/checkpoint.hpp"

namespace clue::cvae {

namespace {

using json = nlohmann::ordered_json;

std::vector<std::size_t> sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

Matrix clamp_mask(const Matrix& raw) {
  return ((raw.array() > kLogStdMin) && (raw.array() < kLogStdMax)).cast<double>().matrix();
}

void check_dims(const CvaeModel& m, const Matrix& states, const Matrix& actions) {
  require(static_cast<std::size_t>(states.cols()) == m.state_dim, "state dimension does not match model");
  require(static_cast<std::size_t>(actions.cols()) == m.action_dim, "action dimension does not match model");
  require(states.rows() == actions.rows(), "state and action batches differ in length");
}

struct EncodedBatch {
  nn::Tape tape;
  LatentBatch latent;
};

EncodedBatch run_encoder(const CvaeModel& m, const Matrix& states, const Matrix& actions) {
  check_dims(m, states, actions);
  EncodedBatch e;
  const Matrix out = m.encoder.forward(m.encoder_input(states, actions), e.tape);
  const auto L = static_cast<Eigen::Index>(m.latent_dim);
  e.latent.mean = out.leftCols(L);
  e.latent.raw_log_std = out.rightCols(L);
  e.latent.std = e.latent.raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax).array().exp().matrix();
  return e;
}

void backprop_encoder(const CvaeModel& m, const EncodedBatch& e, const Matrix& d_mean, Matrix d_log_std,
                      CvaeGradients& grads) {
  d_log_std = d_log_std.cwiseProduct(clamp_mask(e.latent.raw_log_std));
  Matrix d_out(d_mean.rows(), d_mean.cols() * 2);
  d_out << d_mean, d_log_std;
  grads.encoder.add(m.encoder.backward(e.tape, d_out));
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

CvaeModel CvaeModel::create(std::size_t state_dim, std::size_t action_dim, const CvaeConfig& config, Rng& rng) {
  require(state_dim > 0 && action_dim > 0, "state and action dimensions must be positive");
  require(config.calibration_weight >= 0.0, "calibration weight must be non-negative");
  require(config.elbo_samples >= 1, "at least one ELBO sample is required");
  require(config.decoder_std > 0.0, "decoder std must be positive");
  CvaeModel m;
  m.state_dim = state_dim;
  m.action_dim = action_dim;
  m.latent_dim = config.latent_dim > 0 ? config.latent_dim : 2 * action_dim;
  m.calibration_weight = config.calibration_weight;
  m.elbo_samples = config.elbo_samples;
  m.decoder_std = config.decoder_std;
  m.state_stats = data::StateStats::identity(state_dim);
  m.encoder = nn::Mlp::initialized(sizes(state_dim + action_dim, config.hidden, 2 * m.latent_dim),
                                   nn::Activation::relu, nn::Activation::identity, rng);
  m.decoder = nn::Mlp::initialized(sizes(m.latent_dim + state_dim, config.hidden, action_dim), nn::Activation::relu,
                                   nn::Activation::identity, rng);
  return m;
}

Matrix CvaeModel::encoder_input(const Matrix& states, const Matrix& actions) const {
  Matrix x(states.rows(), states.cols() + actions.cols());
  x << state_stats.normalize_rows(states), actions;
  return x;
}

CvaeGradients CvaeGradients::zeros(const CvaeModel& m) {
  return {m.encoder.zero_gradients(), m.decoder.zero_gradients()};
}

nn::ConstParamViews CvaeGradients::views() const {
  auto v = encoder.views();
  auto d = decoder.views();
  v.insert(v.end(), d.begin(), d.end());
  return v;
}

nn::ParamViews parameters(CvaeModel& m) {
  auto v = m.encoder.parameters();
  auto d = m.decoder.parameters();
  v.insert(v.end(), d.begin(), d.end());
  return v;
}

GaussianLatent encode(const CvaeModel& m, const Vector& state, const Vector& action) {
  const LatentBatch b = encode_batch(m, Matrix(state.transpose()), Matrix(action.transpose()));
  return {b.mean.row(0).transpose(), b.std.row(0).transpose()};
}

LatentBatch encode_batch(const CvaeModel& m, const Matrix& states, const Matrix& actions) {
  return run_encoder(m, states, actions).latent;
}

Vector reparameterize(const GaussianLatent& g, Rng& rng) {
  Vector z(g.mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = g.mean[i] + g.std[i] * rng.normal();
  return z;
}

Matrix reparameterize(const LatentBatch& g, const Matrix& noise) {
  require(noise.rows() == g.mean.rows() && noise.cols() == g.mean.cols(), "noise shape does not match latent batch");
  return g.mean + g.std.cwiseProduct(noise);
}

double kl_to_standard_normal(const GaussianLatent& g) {
  require(g.mean.size() == g.std.size(), "mean and std lengths differ");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < g.mean.size(); ++i) {
    const double var = g.std[i] * g.std[i];
    kl += g.mean[i] * g.mean[i] + var - std::log(var) - 1.0;
  }
  return 0.5 * kl;
}

Vector decode(const CvaeModel& m, const Vector& z, const Vector& state) {
  require(static_cast<std::size_t>(z.size()) == m.latent_dim, "latent dimension does not match model");
  require(static_cast<std::size_t>(state.size()) == m.state_dim, "state dimension does not match model");
  Vector x(z.size() + state.size());
  x << z, m.state_stats.normalize(state);
  return m.decoder.forward(x);
}

ElboParts elbo_loss(const CvaeModel& m, const Matrix& states, const Matrix& actions, const std::vector<Matrix>& noise,
                    CvaeGradients* grads) {
  require(!noise.empty(), "at least one ELBO sample is required");
  require(states.rows() > 0, "empty batch");
  const EncodedBatch e = run_encoder(m, states, actions);
  const auto& mu = e.latent.mean;
  const auto& sd = e.latent.std;
  const double n = static_cast<double>(states.rows());
  const double samples = static_cast<double>(noise.size());
  const Matrix log_std = sd.array().log().matrix();
  const Matrix s_norm = m.state_stats.normalize_rows(states);
  const double precision = 1.0 / (m.decoder_std * m.decoder_std);

  ElboParts parts;
  parts.kl = 0.5 * (mu.array().square() + sd.array().square() - 2.0 * log_std.array() - 1.0).sum() / n;

  Matrix d_mean, d_log_std;
  if (grads) {
    d_mean = mu / n;
    d_log_std = (sd.array().square() - 1.0).matrix() / n;
  }
  const auto L = static_cast<Eigen::Index>(m.latent_dim);
  for (const Matrix& eps : noise) {
    const Matrix z = reparameterize(e.latent, eps);
    Matrix dec_in(z.rows(), L + s_norm.cols());
    dec_in << z, s_norm;
    nn::Tape tape;
    const Matrix a_hat = m.decoder.forward(dec_in, tape);
    const Matrix diff = a_hat - actions;
    parts.reconstruction += 0.5 * precision * diff.squaredNorm() / (n * samples);
    if (grads) {
      Matrix d_in;
      grads->decoder.add(m.decoder.backward(tape, diff * (precision / (n * samples)), &d_in));
      const Matrix dz = d_in.leftCols(L);
      d_mean += dz;
      d_log_std += dz.cwiseProduct(eps).cwiseProduct(sd);
    }
  }
  parts.loss = parts.kl + parts.reconstruction;
  if (!std::isfinite(parts.loss)) fail(ErrorCode::training_diverged, "non-finite ELBO");
  if (grads) backprop_encoder(m, e, d_mean, d_log_std, *grads);
  return parts;
}

ElboParts elbo_loss(const CvaeModel& m, const Matrix& states, const Matrix& actions, Rng& rng, CvaeGradients* grads) {
  std::vector<Matrix> noise;
  for (std::size_t l = 0; l < m.elbo_samples; ++l) {
    Matrix eps(states.rows(), static_cast<Eigen::Index>(m.latent_dim));
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
    noise.push_back(std::move(eps));
  }
  return elbo_loss(m, states, actions, noise, grads);
}

double calibration_loss(const CvaeModel& m, const Matrix& states, const Matrix& actions, CvaeGradients* grads,
                        double scale) {
  require(states.rows() > 0, "calibration needs a non-empty expert batch");
  const EncodedBatch e = run_encoder(m, states, actions);
  const double n = static_cast<double>(states.rows());
  const double value = (e.latent.mean.squaredNorm() + e.latent.std.squaredNorm()) / n;
  if (grads && scale != 0.0) {
    const Matrix d_mean = (2.0 * scale / n) * e.latent.mean;
    const Matrix d_log_std = (2.0 * scale / n) * e.latent.std.cwiseAbs2();
    backprop_encoder(m, e, d_mean, d_log_std, *grads);
  }
  return value;
}

TotalLoss total_loss(const CvaeModel& m, const Matrix& mixed_states, const Matrix& mixed_actions,
                     const std::vector<Matrix>& noise, const Matrix& expert_states, const Matrix& expert_actions,
                     CvaeGradients* grads) {
  TotalLoss t;
  t.elbo = elbo_loss(m, mixed_states, mixed_actions, noise, grads);
  if (m.calibration_weight > 0.0) {
    t.calibration = calibration_loss(m, expert_states, expert_actions, grads, m.calibration_weight);
    t.total = t.elbo.loss + m.calibration_weight * t.calibration;
  } else {
    t.total = t.elbo.loss;
  }
  return t;
}

double mean_pairwise_distance(const Matrix& points) {
  const auto n = points.rows();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) sum += (points.row(i) - points.row(j)).norm();
  return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

CvaeTrainReport train(CvaeModel& m, const data::Dataset& mixed, const data::Dataset& expert, const CvaeConfig& config,
                      Rng& rng, bool fit_state_stats) {
  require(config.batch_size > 0, "batch size must be positive");
  require(mixed.state_dim == m.state_dim && mixed.action_dim == m.action_dim, "mixed data dims do not match model");
  require(expert.state_dim == m.state_dim && expert.action_dim == m.action_dim, "expert data dims do not match model");
  const auto mixed_table = data::TransitionTable::from(mixed);
  const auto expert_table = data::TransitionTable::from(expert);
  require(mixed_table.size() > 0, "no mixed transitions to train on");
  require(expert_table.size() > 0 || m.calibration_weight == 0.0, "calibration needs expert transitions");
  if (fit_state_stats) {
    auto stats = data::fit_state_stats(mixed);
    stats.std = stats.std.cwiseMax(1e-6);
    m.state_stats = stats;
  }
  m.calibration_weight = config.calibration_weight;
  m.elbo_samples = config.elbo_samples;
  m.decoder_std = config.decoder_std;

  nn::AdamState adam(nn::AdamConfig{config.learning_rate});
  CvaeTrainReport report;
  const auto B = static_cast<Eigen::Index>(config.batch_size);
  Matrix ms(B, mixed_table.states.cols()), ma(B, mixed_table.actions.cols());
  Matrix es(B, expert_table.states.cols()), ea(B, expert_table.actions.cols());

  for (std::size_t it = 0; it < config.iterations; ++it) {
    for (Eigen::Index r = 0; r < B; ++r) {
      const auto i = static_cast<Eigen::Index>(rng.index(mixed_table.size()));
      ms.row(r) = mixed_table.states.row(i);
      ma.row(r) = mixed_table.actions.row(i);
    }
    if (expert_table.size() > 0) {
      for (Eigen::Index r = 0; r < B; ++r) {
        const auto i = static_cast<Eigen::Index>(rng.index(expert_table.size()));
        es.row(r) = expert_table.states.row(i);
        ea.row(r) = expert_table.actions.row(i);
      }
    }
    std::vector<Matrix> noise;
    for (std::size_t l = 0; l < m.elbo_samples; ++l) {
      Matrix eps(B, static_cast<Eigen::Index>(m.latent_dim));
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
      noise.push_back(std::move(eps));
    }
    auto grads = CvaeGradients::zeros(m);
    try {
      const TotalLoss loss = total_loss(m, ms, ma, noise, es, ea, &grads);
      if (!std::isfinite(loss.total)) fail(ErrorCode::training_diverged, "non-finite CVAE objective");
      nn::adam_step(parameters(m), grads.views(), adam);
      report.elbo.push_back(-loss.elbo.loss);
      report.kl.push_back(loss.elbo.kl);
      report.reconstruction.push_back(loss.elbo.reconstruction);
      report.calibration.push_back(loss.calibration);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::training_diverged) throw;
      report.diverged = true;
      report.message = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
  }

  if (expert_table.size() > 0) {
    const auto stride = std::max<std::size_t>(1, expert_table.size() / 1000);
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < expert_table.size(); i += stride) rows.push_back(static_cast<Eigen::Index>(i));
    Matrix s(static_cast<Eigen::Index>(rows.size()), expert_table.states.cols());
    Matrix a(static_cast<Eigen::Index>(rows.size()), expert_table.actions.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      s.row(static_cast<Eigen::Index>(r)) = expert_table.states.row(rows[r]);
      a.row(static_cast<Eigen::Index>(r)) = expert_table.actions.row(rows[r]);
    }
    const LatentBatch lb = encode_batch(m, s, a);
    report.expert_spread = mean_pairwise_distance(lb.mean);
    const Matrix centered = lb.mean.rowwise() - lb.mean.colwise().mean();
    report.expert_mean_std = (centered.colwise().squaredNorm() / static_cast<double>(lb.mean.rows())).cwiseSqrt().transpose();
  }
  return report;
}

void save_model(const CvaeModel& m, const std::filesystem::path& ckpt, double c_default) {
  if (ckpt.has_parent_path()) std::filesystem::create_directories(ckpt.parent_path());
  nn::save_checkpoint(ckpt, {m.encoder.layers(), m.decoder.layers()});
  json side;
  side["latent_dim"] = m.latent_dim;
  side["state_dim"] = m.state_dim;
  side["action_dim"] = m.action_dim;
  side["lambda"] = m.calibration_weight;
  side["c_default"] = c_default;
  side["elbo_samples"] = m.elbo_samples;
  side["decoder_std"] = m.decoder_std;
  side["records"] = {"encoder", "decoder"};
  side["hidden_activation"] = nn::to_string(m.encoder.hidden_activation());
  side["state_mean"] = vec_json(m.state_stats.mean);
  side["state_std"] = vec_json(m.state_stats.std);
  std::ofstream os(ckpt.string() + ".json", std::ios::trunc);
  if (!os) fail(ErrorCode::io_error, "cannot write sidecar for '" + ckpt.string() + "'");
  os << side.dump(2) << '\n';
}

CvaeModel load_model(const std::filesystem::path& ckpt) {
  const auto records = nn::load_checkpoint(ckpt);
  std::ifstream is(ckpt.string() + ".json");
  if (!is) fail(ErrorCode::io_error, "missing sidecar '" + ckpt.string() + ".json'");
  json side;
  try {
    side = json::parse(is);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("bad CVAE sidecar: ") + e.what());
  }
  if (records.size() != 2) fail(ErrorCode::parse_error, "CVAE checkpoint must hold encoder and decoder records");
  CvaeModel m;
  try {
    m.latent_dim = side.at("latent_dim").get<std::size_t>();
    m.state_dim = side.at("state_dim").get<std::size_t>();
    m.action_dim = side.at("action_dim").get<std::size_t>();
    m.calibration_weight = side.at("lambda").get<double>();
    m.elbo_samples = side.value("elbo_samples", std::size_t{1});
    m.decoder_std = side.value("decoder_std", 1.0);
    m.state_stats = {json_vec(side.at("state_mean")), json_vec(side.at("state_std"))};
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("bad CVAE sidecar: ") + e.what());
  }
  const auto hidden = nn::activation_from_string(side.value("hidden_activation", std::string("relu")));
  m.encoder = nn::Mlp(records[0], hidden, nn::Activation::identity);
  m.decoder = nn::Mlp(records[1], hidden, nn::Activation::identity);
  if (m.encoder.input_size() != m.state_dim + m.action_dim || m.encoder.output_size() != 2 * m.latent_dim ||
      m.decoder.input_size() != m.latent_dim + m.state_dim || m.decoder.output_size() != m.action_dim)
    fail(ErrorCode::validation_error, "CVAE checkpoint shapes disagree with its sidecar");
  return m;
}

}  // namespace clue::cvae
