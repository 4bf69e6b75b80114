#include "clue/offline_rl/iql.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "clue/error.hpp"
#include "clue/format.hpp"
#include "clue/numerics/checkpoint.hpp"

namespace clue::rl {

namespace {

using json = nlohmann::ordered_json;

std::vector<std::size_t> sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorCode::training_diverged, std::string("non-finite ") + what);
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kPi = 3.14159265358979323846;

}  // namespace

void IqlConfig::validate() const {
  require(expectile > 0.0 && expectile < 1.0, "expectile must lie in (0, 1)");
  require(awr_temperature > 0.0, "AWR temperature must be positive");
  require(discount >= 0.0 && discount <= 1.0, "discount must lie in [0, 1]");
  require(polyak > 0.0 && polyak < 1.0, "polyak rate must lie in (0, 1)");
  require(learning_rate > 0.0, "learning rate must be positive");
  require(batch_size > 0, "batch size must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(awr_clip > 0.0, "AWR clip must be positive");
}

IqlAgent IqlAgent::create(std::size_t state_dim, std::size_t action_dim, const IqlConfig& config, Rng& rng) {
  config.validate();
  require(state_dim > 0 && action_dim > 0, "state and action dimensions must be positive");
  IqlAgent a;
  a.config = config;
  a.state_dim = state_dim;
  a.action_dim = action_dim;
  a.state_stats = data::StateStats::identity(state_dim);
  using nn::Activation;
  a.value = nn::Mlp::initialized(sizes(state_dim, config.hidden, 1), Activation::relu, Activation::identity, rng);
  a.q1 = nn::Mlp::initialized(sizes(state_dim + action_dim, config.hidden, 1), Activation::relu, Activation::identity, rng);
  a.q2 = nn::Mlp::initialized(sizes(state_dim + action_dim, config.hidden, 1), Activation::relu, Activation::identity, rng);
  a.q1_target = a.q1;
  a.q2_target = a.q2;
  a.policy = nn::Mlp::initialized(sizes(state_dim, config.hidden, action_dim), Activation::relu, Activation::tanh, rng);
  a.log_std = Vector::Zero(static_cast<Eigen::Index>(action_dim));
  a.value_opt = nn::AdamState(nn::AdamConfig{config.learning_rate});
  a.critic_opt = nn::AdamState(nn::AdamConfig{config.learning_rate});
  a.policy_opt = nn::AdamState(nn::AdamConfig{config.learning_rate});
  return a;
}

Vector IqlAgent::clamped_log_std() const { return log_std.cwiseMax(kPolicyLogStdMin).cwiseMin(kPolicyLogStdMax); }

double expectile_loss(double u, double tau) {
  const double w = u < 0.0 ? 1.0 - tau : tau;
  return w * u * u;
}

double expectile_loss_derivative(double u, double tau) {
  const double w = u < 0.0 ? 1.0 - tau : tau;
  return 2.0 * w * u;
}

Matrix state_action(const Matrix& states, const Matrix& actions) {
  Matrix x(states.rows(), states.cols() + actions.cols());
  x << states, actions;
  return x;
}

Vector target_q(const IqlAgent& agent, const IqlBatch& batch) {
  const Matrix sa = state_action(agent.normalize(batch.states), batch.actions);
  const Matrix a = agent.q1_target.forward(sa);
  const Matrix b = agent.q2_target.forward(sa);
  return a.col(0).cwiseMin(b.col(0));
}

double value_loss(const IqlAgent& agent, const IqlBatch& batch, nn::MlpGradients* grad) {
  const Vector q = target_q(agent, batch);
  nn::Tape tape;
  const Matrix v = agent.value.forward(agent.normalize(batch.states), tape);
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  Matrix dv(v.rows(), 1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double u = q[i] - v(i, 0);
    loss += expectile_loss(u, agent.config.expectile);
    dv(i, 0) = -expectile_loss_derivative(u, agent.config.expectile) / n;
  }
  loss /= n;
  if (grad) *grad = agent.value.backward(tape, dv);
  return loss;
}

Vector td_targets(const IqlAgent& agent, const IqlBatch& batch) {
  const Matrix next_v = agent.value.forward(agent.normalize(batch.next_states));
  Vector y(batch.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    y[i] = agent.scaler.apply(batch.rewards[i]) + agent.config.discount * (1.0 - batch.terminals[i]) * next_v(i, 0);
  return y;
}

double critic_loss(const IqlAgent& agent, const IqlBatch& batch, nn::MlpGradients* grad_q1,
                   nn::MlpGradients* grad_q2) {
  const Vector y = td_targets(agent, batch);
  const Matrix sa = state_action(agent.normalize(batch.states), batch.actions);
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  auto one = [&](const nn::Mlp& net, nn::MlpGradients* grad) {
    nn::Tape tape;
    const Matrix q = net.forward(sa, tape);
    const Vector diff = q.col(0) - y;
    loss += diff.squaredNorm() / n;
    if (grad) *grad = net.backward(tape, Matrix(2.0 * diff / n));
  };
  one(agent.q1, grad_q1);
  one(agent.q2, grad_q2);
  return loss;
}

Vector awr_weights(const IqlAgent& agent, const IqlBatch& batch) {
  const Vector q = target_q(agent, batch);
  const Matrix v = agent.value.forward(agent.normalize(batch.states));
  Vector w(q.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w[i] = std::min(std::exp(agent.config.awr_temperature * (q[i] - v(i, 0))), agent.config.awr_clip);
  return w;
}

double awr_loss(const IqlAgent& agent, const IqlBatch& batch, PolicyGradients* grad, Rng* dropout_rng) {
  const Vector w = awr_weights(agent, batch);
  nn::Tape tape;
  const double dropout = dropout_rng ? agent.config.dropout : 0.0;
  const Matrix mean = agent.policy.forward(agent.normalize(batch.states), tape, dropout, dropout_rng);
  const Vector log_std = agent.clamped_log_std();
  const Vector inv_var = (-2.0 * log_std).array().exp().matrix();
  const double n = static_cast<double>(batch.size());
  const auto adim = mean.cols();

  double loss = 0.0;
  Matrix d_mean(mean.rows(), adim);
  Vector d_log_std = Vector::Zero(adim);
  for (Eigen::Index i = 0; i < mean.rows(); ++i) {
    double log_prob = 0.0;
    for (Eigen::Index j = 0; j < adim; ++j) {
      const double diff = batch.actions(i, j) - mean(i, j);
      const double z2 = diff * diff * inv_var[j];
      log_prob += -0.5 * z2 - log_std[j] - kHalfLog2Pi;
      d_mean(i, j) = -w[i] * diff * inv_var[j] / n;
      d_log_std[j] += w[i] * (1.0 - z2) / n;
    }
    loss -= w[i] * log_prob;
  }
  loss /= n;
  if (grad) {
    grad->net = agent.policy.backward(tape, d_mean);
    for (Eigen::Index j = 0; j < adim; ++j) {
      if (agent.log_std[j] <= kPolicyLogStdMin || agent.log_std[j] >= kPolicyLogStdMax) d_log_std[j] = 0.0;
    }
    grad->log_std = d_log_std;
  }
  return loss;
}

void polyak_update(nn::Mlp& target, const nn::Mlp& online, double rho) {
  require(target.layer_sizes() == online.layer_sizes(), "target and online networks differ in shape");
  auto& tl = target.layers();
  const auto& ol = online.layers();
  for (std::size_t l = 0; l < tl.size(); ++l) {
    tl[l].weight = rho * ol[l].weight + (1.0 - rho) * tl[l].weight;
    tl[l].bias = rho * ol[l].bias + (1.0 - rho) * tl[l].bias;
  }
}

StepReport train_step(IqlAgent& agent, const IqlBatch& batch, Rng& rng) {
  StepReport r;

  nn::MlpGradients gv;
  r.v_loss = value_loss(agent, batch, &gv);
  check_finite(r.v_loss, "value loss");
  nn::adam_step(agent.value.parameters(), std::as_const(gv).views(), agent.value_opt);

  nn::MlpGradients g1, g2;
  r.q_loss = critic_loss(agent, batch, &g1, &g2);
  check_finite(r.q_loss, "critic loss");
  {
    auto params = agent.q1.parameters();
    auto p2 = agent.q2.parameters();
    params.insert(params.end(), p2.begin(), p2.end());
    auto grads = std::as_const(g1).views();
    auto v2 = std::as_const(g2).views();
    grads.insert(grads.end(), v2.begin(), v2.end());
    nn::adam_step(params, grads, agent.critic_opt);
  }

  PolicyGradients gp;
  r.pi_loss = awr_loss(agent, batch, &gp, agent.config.dropout > 0.0 ? &rng : nullptr);
  check_finite(r.pi_loss, "policy loss");
  {
    auto params = agent.policy.parameters();
    params.emplace_back(agent.log_std.data(), static_cast<std::size_t>(agent.log_std.size()));
    auto grads = std::as_const(gp.net).views();
    grads.emplace_back(std::as_const(gp.log_std).data(), static_cast<std::size_t>(gp.log_std.size()));
    nn::adam_step(params, grads, agent.policy_opt);
  }

  polyak_update(agent.q1_target, agent.q1, agent.config.polyak);
  polyak_update(agent.q2_target, agent.q2, agent.config.polyak);
  return r;
}

Vector act(const IqlAgent& agent, const Vector& state, bool deterministic, Rng* rng) {
  require(static_cast<std::size_t>(state.size()) == agent.state_dim, "state dimension does not match agent");
  Vector mean = agent.policy.forward(agent.state_stats.normalize(state));
  if (deterministic) return mean;
  require(rng != nullptr, "stochastic action needs a generator");
  const Vector sd = agent.clamped_log_std().array().exp().matrix();
  for (Eigen::Index j = 0; j < mean.size(); ++j) mean[j] = std::clamp(mean[j] + sd[j] * rng->normal(), -1.0, 1.0);
  return mean;
}

IqlBatch sample_batch(const data::TransitionTable& table, std::size_t batch_size, Rng& rng) {
  const auto B = static_cast<Eigen::Index>(batch_size);
  IqlBatch b{Matrix(B, table.states.cols()), Matrix(B, table.actions.cols()), Matrix(B, table.states.cols()),
             Vector(B), Vector(B)};
  for (Eigen::Index r = 0; r < B; ++r) {
    const auto i = static_cast<Eigen::Index>(rng.index(table.size()));
    b.states.row(r) = table.states.row(i);
    b.actions.row(r) = table.actions.row(i);
    b.next_states.row(r) = table.next_states.row(i);
    b.rewards[r] = table.rewards[i];
    b.terminals[r] = table.terminals[i];
  }
  return b;
}

TrainResult train(IqlAgent& agent, const data::Dataset& d, std::size_t steps, Rng& rng, const TrainOptions& options) {
  if (!d.reward_labeled()) fail(ErrorCode::missing_rewards, "IQL needs a reward-labeled dataset");
  require(d.state_dim == agent.state_dim && d.action_dim == agent.action_dim, "dataset dims do not match agent");
  auto stats = data::fit_state_stats(d);
  stats.std = stats.std.cwiseMax(1e-6);
  agent.state_stats = stats;
  agent.scaler = make_reward_scaler(d, agent.config.reward_scaling);
  const auto table = data::TransitionTable::from(d);

  TrainResult result;
  CurveRow acc;
  std::size_t acc_n = 0;
  auto flush = [&](std::size_t step) {
    CurveRow row;
    row.step = step;
    if (acc_n > 0) {
      row.v_loss = acc.v_loss / static_cast<double>(acc_n);
      row.q_loss = acc.q_loss / static_cast<double>(acc_n);
      row.pi_loss = acc.pi_loss / static_cast<double>(acc_n);
    }
    if (options.evaluator) {
      const EvalScore s = options.evaluator(agent);
      row.eval_return = s.mean_return;
      row.eval_success_rate = s.success_rate;
    }
    result.curves.push_back(row);
    acc = {};
    acc_n = 0;
  };

  // The actor learning rate follows a cosine decay to zero over the run, as
  // in the reference IQL recipe; critics keep a constant rate.
  const double actor_lr = agent.config.learning_rate;
  for (std::size_t step = 1; step <= steps; ++step) {
    agent.policy_opt.config.learning_rate =
        actor_lr * 0.5 * (1.0 + std::cos(kPi * static_cast<double>(step - 1) / static_cast<double>(steps)));
    const IqlBatch batch = sample_batch(table, agent.config.batch_size, rng);
    try {
      const StepReport r = train_step(agent, batch, rng);
      acc.v_loss += r.v_loss;
      acc.q_loss += r.q_loss;
      acc.pi_loss += r.pi_loss;
      ++acc_n;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::training_diverged) throw;
      result.diverged = true;
      result.message = "step " + std::to_string(step) + ": " + e.what();
      agent.policy_opt.config.learning_rate = actor_lr;
      return result;
    }
    if ((options.eval_interval > 0 && step % options.eval_interval == 0) || step == steps) {
      if (result.curves.empty() || result.curves.back().step != step) flush(step);
    }
  }
  agent.policy_opt.config.learning_rate = actor_lr;
  return result;
}

std::string curves_csv(const std::vector<CurveRow>& rows) {
  std::string out = "step,v_loss,q_loss,pi_loss,eval_return,eval_success_rate\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + ',' + fmt_double(r.v_loss) + ',' + fmt_double(r.q_loss) + ',' +
           fmt_double(r.pi_loss) + ',' + fmt_double(r.eval_return) + ',' + fmt_double(r.eval_success_rate) + '\n';
  }
  return out;
}

void save_agent(const IqlAgent& a, const std::filesystem::path& ckpt) {
  if (ckpt.has_parent_path()) std::filesystem::create_directories(ckpt.parent_path());
  nn::save_checkpoint(ckpt, {a.value.layers(), a.q1.layers(), a.q2.layers(), a.q1_target.layers(),
                             a.q2_target.layers(), a.policy.layers(), nn::vector_record(a.log_std)});
  json side;
  side["state_dim"] = a.state_dim;
  side["action_dim"] = a.action_dim;
  side["records"] = {"value", "q1", "q2", "q1_target", "q2_target", "policy", "log_std"};
  side["hidden"] = a.config.hidden;
  side["expectile"] = a.config.expectile;
  side["awr_temperature"] = a.config.awr_temperature;
  side["discount"] = a.config.discount;
  side["polyak"] = a.config.polyak;
  side["learning_rate"] = a.config.learning_rate;
  side["batch_size"] = a.config.batch_size;
  side["dropout"] = a.config.dropout;
  side["awr_clip"] = a.config.awr_clip;
  side["reward_scaling"] = to_string(a.config.reward_scaling);
  side["reward_scale"] = a.scaler.scale;
  side["state_mean"] = vec_json(a.state_stats.mean);
  side["state_std"] = vec_json(a.state_stats.std);
  std::ofstream os(ckpt.string() + ".json", std::ios::trunc);
  if (!os) fail(ErrorCode::io_error, "cannot write sidecar for '" + ckpt.string() + "'");
  os << side.dump(2) << '\n';
}

IqlAgent load_agent(const std::filesystem::path& ckpt) {
  const auto records = nn::load_checkpoint(ckpt);
  if (records.size() != 7) fail(ErrorCode::parse_error, "agent checkpoint must hold 7 records");
  std::ifstream is(ckpt.string() + ".json");
  if (!is) fail(ErrorCode::io_error, "missing sidecar '" + ckpt.string() + ".json'");
  IqlAgent a;
  try {
    const json side = json::parse(is);
    a.state_dim = side.at("state_dim").get<std::size_t>();
    a.action_dim = side.at("action_dim").get<std::size_t>();
    a.config.hidden = side.at("hidden").get<std::vector<std::size_t>>();
    a.config.expectile = side.at("expectile").get<double>();
    a.config.awr_temperature = side.at("awr_temperature").get<double>();
    a.config.discount = side.at("discount").get<double>();
    a.config.polyak = side.at("polyak").get<double>();
    a.config.learning_rate = side.at("learning_rate").get<double>();
    a.config.batch_size = side.at("batch_size").get<std::size_t>();
    a.config.dropout = side.at("dropout").get<double>();
    a.config.awr_clip = side.at("awr_clip").get<double>();
    a.config.reward_scaling = scale_mode_from_string(side.at("reward_scaling").get<std::string>());
    a.scaler = {side.at("reward_scale").get<double>(), a.config.reward_scaling,
                a.config.reward_scaling == ScaleMode::shift ? -1.0 : 0.0};
    a.state_stats = {json_vec(side.at("state_mean")), json_vec(side.at("state_std"))};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_error, std::string("bad agent sidecar: ") + e.what());
  }
  using nn::Activation;
  a.value = nn::Mlp(records[0], Activation::relu, Activation::identity);
  a.q1 = nn::Mlp(records[1], Activation::relu, Activation::identity);
  a.q2 = nn::Mlp(records[2], Activation::relu, Activation::identity);
  a.q1_target = nn::Mlp(records[3], Activation::relu, Activation::identity);
  a.q2_target = nn::Mlp(records[4], Activation::relu, Activation::identity);
  a.policy = nn::Mlp(records[5], Activation::relu, Activation::tanh);
  a.log_std = nn::vector_from_record(records[6]);
  if (a.policy.input_size() != a.state_dim || a.policy.output_size() != a.action_dim ||
      static_cast<std::size_t>(a.log_std.size()) != a.action_dim)
    fail(ErrorCode::validation_error, "agent checkpoint shapes disagree with its sidecar");
  a.value_opt = nn::AdamState(nn::AdamConfig{a.config.learning_rate});
  a.critic_opt = nn::AdamState(nn::AdamConfig{a.config.learning_rate});
  a.policy_opt = nn::AdamState(nn::AdamConfig{a.config.learning_rate});
  return a;
}

}  // namespace clue::rl
