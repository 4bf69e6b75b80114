#include "clue/dataset/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "clue/error.hpp"

namespace clue::data {

using json = nlohmann::ordered_json;

namespace {

constexpr double kStdFloor = 1e-6;

json vec_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector json_to_vec(const json& j, const std::string& where) {
  if (!j.is_array()) fail(ErrorCode::parse_error, where + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(ErrorCode::parse_error, where + ": expected a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

std::vector<double> json_to_doubles(const json& j, const std::string& where) {
  const Vector v = json_to_vec(j, where);
  return {v.data(), v.data() + v.size()};
}

json trajectory_to_json(const Trajectory& t) {
  json j;
  json obs = json::array();
  for (const auto& o : t.observations) obs.push_back(vec_to_json(o));
  json acts = json::array();
  for (const auto& a : t.actions) acts.push_back(vec_to_json(a));
  j["observations"] = std::move(obs);
  j["actions"] = std::move(acts);
  j["rewards"] = t.rewards ? json(*t.rewards) : json(nullptr);
  json terms = json::array();
  for (bool b : t.terminals) terms.push_back(b);
  j["terminals"] = std::move(terms);
  j["success"] = t.success ? json(*t.success) : json(nullptr);
  if (t.original_rewards) j["original_rewards"] = *t.original_rewards;
  return j;
}

Trajectory trajectory_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::parse_error, where + ": expected a JSON object");
  for (const char* key : {"observations", "actions", "terminals"}) {
    if (!j.contains(key)) fail(ErrorCode::parse_error, where + ": missing field '" + key + "'");
  }
  Trajectory t;
  for (const auto& o : j.at("observations")) t.observations.push_back(json_to_vec(o, where + " observations"));
  for (const auto& a : j.at("actions")) t.actions.push_back(json_to_vec(a, where + " actions"));
  if (j.contains("rewards") && !j.at("rewards").is_null())
    t.rewards = json_to_doubles(j.at("rewards"), where + " rewards");
  for (const auto& b : j.at("terminals")) {
    if (!b.is_boolean()) fail(ErrorCode::parse_error, where + ": terminals must be booleans");
    t.terminals.push_back(b.get<bool>());
  }
  if (j.contains("success") && !j.at("success").is_null()) {
    if (!j.at("success").is_boolean()) fail(ErrorCode::parse_error, where + ": success must be a boolean");
    t.success = j.at("success").get<bool>();
  }
  if (j.contains("original_rewards") && !j.at("original_rewards").is_null())
    t.original_rewards = json_to_doubles(j.at("original_rewards"), where + " original_rewards");
  return t;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

std::optional<double> Trajectory::total_return() const {
  if (!rewards) return std::nullopt;
  return std::accumulate(rewards->begin(), rewards->end(), 0.0);
}

Transition Trajectory::transition(std::size_t t) const {
  require(t < length(), "transition index out of range");
  Transition tr;
  tr.state = observations[t];
  tr.action = actions[t];
  if (rewards) tr.reward = (*rewards)[t];
  tr.next_state = observations[t + 1];
  tr.terminal = terminals[t];
  return tr;
}

Vector StateStats::normalize(const Vector& s) const { return (s - mean).cwiseQuotient(std); }
Vector StateStats::denormalize(const Vector& s) const { return s.cwiseProduct(std) + mean; }

Matrix StateStats::normalize_rows(const Matrix& states) const {
  Matrix out = states;
  out.rowwise() -= mean.transpose();
  out = out.array().rowwise() / std.transpose().array();
  return out;
}

StateStats StateStats::identity(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return {Vector::Zero(n), Vector::Ones(n)};
}

bool Dataset::reward_labeled() const {
  return !trajectories.empty() &&
         std::all_of(trajectories.begin(), trajectories.end(), [](const Trajectory& t) { return t.rewards.has_value(); });
}

std::size_t Dataset::transition_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.length();
  return n;
}

void Dataset::validate() const {
  auto bad = [](std::size_t i, const std::string& msg) {
    fail(ErrorCode::validation_error, "trajectory " + std::to_string(i) + ": " + msg);
  };
  if (trajectories.empty()) fail(ErrorCode::validation_error, "dataset has no trajectories");
  const bool labeled = trajectories.front().rewards.has_value();
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& t = trajectories[i];
    if (t.actions.empty()) bad(i, "empty trajectory");
    if (t.observations.size() != t.actions.size() + 1) bad(i, "observations must have one more entry than actions");
    if (t.terminals.size() != t.actions.size()) bad(i, "terminals length differs from actions");
    if (t.rewards.has_value() != labeled) bad(i, "rewards must be present on all trajectories or none");
    if (t.rewards && t.rewards->size() != t.actions.size()) bad(i, "rewards length differs from actions");
    if (t.original_rewards && t.original_rewards->size() != t.actions.size())
      bad(i, "original_rewards length differs from actions");
    for (const auto& o : t.observations) {
      if (static_cast<std::size_t>(o.size()) != state_dim) bad(i, "observation dimension mismatch");
      if (!all_finite(o)) bad(i, "non-finite observation");
    }
    for (const auto& a : t.actions) {
      if (static_cast<std::size_t>(a.size()) != action_dim) bad(i, "action dimension mismatch");
      if (!all_finite(a)) bad(i, "non-finite action");
    }
    if (t.rewards) {
      for (double r : *t.rewards) {
        if (!std::isfinite(r)) bad(i, "non-finite reward");
      }
    }
    for (std::size_t s = 0; s + 1 < t.terminals.size(); ++s) {
      if (t.terminals[s]) bad(i, "only the final transition may be terminal");
    }
  }
}

Dataset Dataset::from_trajectories(std::vector<Trajectory> trajectories) {
  Dataset d;
  d.trajectories = std::move(trajectories);
  if (!d.trajectories.empty() && !d.trajectories.front().observations.empty()) {
    d.state_dim = static_cast<std::size_t>(d.trajectories.front().observations.front().size());
    if (!d.trajectories.front().actions.empty())
      d.action_dim = static_cast<std::size_t>(d.trajectories.front().actions.front().size());
  }
  d.validate();
  return d;
}

TransitionTable TransitionTable::from(const Dataset& d) {
  const auto n = static_cast<Eigen::Index>(d.transition_count());
  const auto sd = static_cast<Eigen::Index>(d.state_dim);
  const auto ad = static_cast<Eigen::Index>(d.action_dim);
  TransitionTable t;
  t.states.resize(n, sd);
  t.actions.resize(n, ad);
  t.next_states.resize(n, sd);
  t.rewards = Vector::Zero(n);
  t.terminals = Vector::Zero(n);
  t.labeled = d.reward_labeled();
  Eigen::Index row = 0;
  for (const auto& traj : d.trajectories) {
    for (std::size_t k = 0; k < traj.length(); ++k, ++row) {
      t.states.row(row) = traj.observations[k].transpose();
      t.actions.row(row) = traj.actions[k].transpose();
      t.next_states.row(row) = traj.observations[k + 1].transpose();
      if (traj.rewards) t.rewards[row] = (*traj.rewards)[k];
      t.terminals[row] = traj.terminals[k] ? 1.0 : 0.0;
    }
  }
  return t;
}

TransitionTable TransitionTable::concat(const TransitionTable& a, const TransitionTable& b) {
  require(a.states.cols() == b.states.cols() && a.actions.cols() == b.actions.cols(),
          "cannot concatenate transition tables with different dimensions");
  TransitionTable t;
  auto stack = [](const Matrix& x, const Matrix& y) {
    Matrix m(x.rows() + y.rows(), x.cols());
    m << x, y;
    return m;
  };
  t.states = stack(a.states, b.states);
  t.actions = stack(a.actions, b.actions);
  t.next_states = stack(a.next_states, b.next_states);
  t.rewards.resize(a.rewards.size() + b.rewards.size());
  t.rewards << a.rewards, b.rewards;
  t.terminals.resize(a.terminals.size() + b.terminals.size());
  t.terminals << a.terminals, b.terminals;
  t.labeled = a.labeled && b.labeled;
  return t;
}

std::string to_jsonl(const Dataset& d) {
  std::string out;
  for (const auto& t : d.trajectories) {
    out += trajectory_to_json(t).dump();
    out += '\n';
  }
  return out;
}

Dataset from_jsonl(const std::string& text) {
  std::vector<Trajectory> trajectories;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::parse_error, where + ", byte " + std::to_string(e.byte) + ": " + e.what());
    }
    trajectories.push_back(trajectory_from_json(j, where));
  }
  return Dataset::from_trajectories(std::move(trajectories));
}

Dataset load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::io_error, "cannot open dataset '" + path.string() + "'");
  std::stringstream buffer;
  buffer << is.rdbuf();
  return from_jsonl(buffer.str());
}

void save(const Dataset& d, const std::filesystem::path& path) {
  d.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::io_error, "cannot open '" + path.string() + "' for writing");
  os << to_jsonl(d);
  if (!os) fail(ErrorCode::io_error, "failed writing '" + path.string() + "'");
}

bool is_success(const Trajectory& t) {
  if (t.success) return *t.success;
  if (t.original_rewards)
    return std::any_of(t.original_rewards->begin(), t.original_rewards->end(), [](double r) { return r > 0.0; });
  if (t.rewards) return std::any_of(t.rewards->begin(), t.rewards->end(), [](double r) { return r > 0.0; });
  fail(ErrorCode::missing_rewards, "trajectory has neither rewards nor a success flag");
}

ExpertSplit filter_expert_by_success(const Dataset& d, std::size_t k, bool strip_rest_rewards) {
  require(k >= 1, "k must be at least 1");
  std::vector<std::size_t> successes;
  for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
    if (is_success(d.trajectories[i])) successes.push_back(i);
  }
  if (successes.empty()) fail(ErrorCode::no_expert_found, "no successful trajectory in dataset");

  // Rank by task reward; relabeled data keeps it in original_rewards.
  auto ret = [&](std::size_t i) {
    const auto& t = d.trajectories[i];
    if (t.original_rewards) return std::accumulate(t.original_rewards->begin(), t.original_rewards->end(), 0.0);
    return t.total_return().value_or(0.0);
  };
  std::stable_sort(successes.begin(), successes.end(), [&](std::size_t a, std::size_t b) { return ret(a) > ret(b); });
  successes.resize(std::min(k, successes.size()));
  std::sort(successes.begin(), successes.end());

  ExpertSplit split;
  split.expert_indices = successes;
  std::vector<Trajectory> expert, rest;
  std::size_t next = 0;
  for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
    if (next < successes.size() && successes[next] == i) {
      expert.push_back(d.trajectories[i]);
      ++next;
    } else {
      Trajectory t = d.trajectories[i];
      if (strip_rest_rewards && t.rewards) {
        t.original_rewards = std::move(t.rewards);
        t.rewards.reset();
      }
      rest.push_back(std::move(t));
    }
  }
  split.expert = Dataset::from_trajectories(std::move(expert));
  if (!rest.empty()) {
    split.rest = Dataset::from_trajectories(std::move(rest));
  } else {
    split.rest.state_dim = d.state_dim;
    split.rest.action_dim = d.action_dim;
  }
  return split;
}

ReturnStats compute_returns(const Dataset& d) {
  if (!d.reward_labeled()) fail(ErrorCode::missing_rewards, "dataset carries no rewards");
  ReturnStats s;
  for (const auto& t : d.trajectories) s.returns.push_back(*t.total_return());
  s.min = *std::min_element(s.returns.begin(), s.returns.end());
  s.max = *std::max_element(s.returns.begin(), s.returns.end());
  return s;
}

StateStats fit_state_stats(const Dataset& d) {
  std::size_t n = 0;
  for (const auto& t : d.trajectories) n += t.observations.size();
  require(n >= 2, "normalization needs at least two states");
  const auto dim = static_cast<Eigen::Index>(d.state_dim);
  Vector mean = Vector::Zero(dim);
  for (const auto& t : d.trajectories)
    for (const auto& o : t.observations) mean += o;
  mean /= static_cast<double>(n);
  Vector var = Vector::Zero(dim);
  for (const auto& t : d.trajectories)
    for (const auto& o : t.observations) var += (o - mean).cwiseAbs2();
  var /= static_cast<double>(n);
  return {mean, var.cwiseSqrt()};
}

NormalizeResult normalize_states(const Dataset& d) {
  NormalizeResult r;
  r.stats = fit_state_stats(d);
  for (Eigen::Index i = 0; i < r.stats.std.size(); ++i) {
    if (r.stats.std[i] < kStdFloor) {
      r.stats.std[i] = kStdFloor;
      r.warnings.push_back("state dimension " + std::to_string(i) + " is constant; std floored at 1e-6");
      warn(r.warnings.back());
    }
  }
  r.dataset = d;
  for (auto& t : r.dataset.trajectories)
    for (auto& o : t.observations) o = r.stats.normalize(o);
  return r;
}

Dataset denormalize_states(const Dataset& d, const StateStats& stats) {
  Dataset out = d;
  for (auto& t : out.trajectories)
    for (auto& o : t.observations) o = stats.denormalize(o);
  return out;
}

Dataset subsample(const Dataset& d, double fraction, Rng& rng) {
  require(fraction > 0.0 && fraction <= 1.0, "fraction must lie in (0, 1]");
  std::vector<std::size_t> idx(d.trajectories.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * idx.size())));
  idx.resize(std::min(keep, idx.size()));
  std::sort(idx.begin(), idx.end());
  std::vector<Trajectory> out;
  for (auto i : idx) out.push_back(d.trajectories[i]);
  return Dataset::from_trajectories(std::move(out));
}

Dataset strip_rewards(const Dataset& d) {
  Dataset out = d;
  for (auto& t : out.trajectories) {
    if (t.rewards) t.original_rewards = std::move(t.rewards);
    t.rewards.reset();
  }
  return out;
}

}  // namespace clue::data
