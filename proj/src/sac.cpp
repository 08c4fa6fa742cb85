#include "amrl/sac.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "amrl/error.hpp"
#include "amrl/kv.hpp"

namespace amrl::sac {

namespace {

constexpr std::size_t kObs = env::kObservationSize;
constexpr std::size_t kAct = env::kActionSize;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) { return splitmix64(seed ^ splitmix64(stream)); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

/// log(1 - tanh(u)^2), stable for large |u|.
double log_one_minus_tanh_sq(double u) { return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)); }

Matrix normal_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.data) v = normal(rng);
  return m;
}

std::vector<std::size_t> dims_for(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> d{in};
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(out);
  return d;
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw TrainingFault(name);
}

void adam_step(netopt::AdamState& opt, std::span<double> params, std::span<const double> grads, const char* name) {
  try {
    opt.step(params, grads);
  } catch (const OptimizerFault&) {
    throw TrainingFault(name);
  }
}

}  // namespace

void SacConfig::validate() const {
  if (!(discount > 0.0 && discount < 1.0)) throw DomainError("discount must lie in (0, 1)");
  if (!(polyak > 0.0 && polyak < 1.0)) throw DomainError("polyak must lie in (0, 1)");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0) || !(lr_alpha > 0.0)) throw DomainError("learning rates must be positive");
  if (batch == 0 || capacity == 0 || batch > capacity) throw DomainError("need 0 < batch <= capacity");
  if (updates_per_step == 0) throw DomainError("updates_per_step must be positive");
  if (!(init_alpha > 0.0)) throw DomainError("init_alpha must be positive");
  if (hidden.empty()) throw DomainError("hidden layer list must not be empty");
  for (std::size_t h : hidden) {
    if (h == 0) throw DomainError("hidden sizes must be positive");
  }
}

// ---- replay buffer ----

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw DomainError("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(const Transition& t) {
  if (items_.size() < capacity_) {
    items_.push_back(t);
  } else {
    items_[head_] = t;
  }
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw Error("replay index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  return items_[(oldest + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, std::mt19937_64& rng) const {
  if (size_ < batch || size_ == 0) {
    throw Error("replay buffer holds " + std::to_string(size_) + " transitions, batch needs " + std::to_string(batch));
  }
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

Batch ReplayBuffer::sample(std::size_t batch, std::mt19937_64& rng) const {
  const auto idx = sample_indices(batch, rng);
  Batch b{Matrix(batch, kObs), Matrix(batch, kAct), std::vector<double>(batch), Matrix(batch, kObs),
          std::vector<double>(batch)};
  for (std::size_t r = 0; r < batch; ++r) {
    const Transition& t = items_[idx[r]];
    std::copy(t.obs.begin(), t.obs.end(), b.obs.row(r).begin());
    std::copy(t.action.begin(), t.action.end(), b.action.row(r).begin());
    std::copy(t.next_obs.begin(), t.next_obs.end(), b.next_obs.row(r).begin());
    b.reward[r] = t.reward;
    b.done[r] = t.done ? 1.0 : 0.0;
  }
  return b;
}

// ---- agent ----

SacAgent SacAgent::create(const SacConfig& config) {
  config.validate();
  SacAgent a;
  a.config = config;
  a.policy = Mlp::init(dims_for(kObs, config.hidden, 2 * kAct), derive(config.seed, 1));
  a.q1 = Mlp::init(dims_for(kObs + kAct, config.hidden, 1), derive(config.seed, 2));
  a.q2 = Mlp::init(dims_for(kObs + kAct, config.hidden, 1), derive(config.seed, 3));
  a.q1_target = a.q1;
  a.q2_target = a.q2;
  a.log_alpha = std::log(config.init_alpha);
  a.policy_opt = netopt::AdamState(a.policy.param_count(), {config.lr_actor});
  a.q1_opt = netopt::AdamState(a.q1.param_count(), {config.lr_critic});
  a.q2_opt = netopt::AdamState(a.q2.param_count(), {config.lr_critic});
  a.alpha_opt = netopt::AdamState(1, {config.lr_alpha});
  a.rng.seed(derive(config.seed, 4));
  return a;
}

double SacAgent::alpha() const { return std::exp(log_alpha); }

void SacAgent::set_backend(netopt::Backend b) {
  for (Mlp* m : {&policy, &q1, &q2, &q1_target, &q2_target}) m->set_backend(b);
}

double squashed_log_prob(double mean, double log_std, double xi) {
  const double u = mean + std::exp(log_std) * xi;
  return -0.5 * xi * xi - log_std - kHalfLog2Pi - log_one_minus_tanh_sq(u);
}

ActionSample select_action(const SacAgent& agent, const env::Observation& obs, bool deterministic,
                           std::mt19937_64& rng) {
  Matrix x(1, kObs);
  std::copy(obs.begin(), obs.end(), x.data.begin());
  const Matrix out = agent.policy.forward(x);
  const double bound = std::nextafter(1.0, 0.0);
  ActionSample s;
  if (deterministic) {
    for (std::size_t j = 0; j < kAct; ++j) s.action[j] = std::clamp(std::tanh(out(0, j)), -bound, bound);
    return s;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = 0; j < kAct; ++j) {
    const double mean = out(0, j);
    const double log_std = std::clamp(out(0, kAct + j), kLogStdMin, kLogStdMax);
    const double xi = normal(rng);
    s.action[j] = std::clamp(std::tanh(mean + std::exp(log_std) * xi), -bound, bound);
    s.log_prob += squashed_log_prob(mean, log_std, xi);
  }
  return s;
}

Matrix concat_columns(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw ShapeError("row count mismatch in concat");
  Matrix m(a.rows, a.cols + b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    std::copy(a.row(r).begin(), a.row(r).end(), m.row(r).begin());
    std::copy(b.row(r).begin(), b.row(r).end(), m.row(r).begin() + static_cast<std::ptrdiff_t>(a.cols));
  }
  return m;
}

PolicySample sample_policy(const Mlp& policy, const Matrix& obs, const Matrix& noise, Mlp::Tape* tape) {
  Mlp::Tape local;
  const Matrix& out = policy.forward(obs, tape ? *tape : local);
  const std::size_t n = obs.rows;
  PolicySample s{Matrix(n, kAct), std::vector<double>(n, 0.0), Matrix(n, kAct), Matrix(n, kAct), Matrix(n, kAct),
                 Matrix(n, kAct)};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < kAct; ++j) {
      const double mean = out(r, j);
      const double raw = out(r, kAct + j);
      const double log_std = std::clamp(raw, kLogStdMin, kLogStdMax);
      const double xi = noise(r, j);
      const double u = mean + std::exp(log_std) * xi;
      s.mean(r, j) = mean;
      s.raw_log_std(r, j) = raw;
      s.log_std(r, j) = log_std;
      s.pre_tanh(r, j) = u;
      s.action(r, j) = std::tanh(u);
      s.log_prob[r] += -0.5 * xi * xi - log_std - kHalfLog2Pi - log_one_minus_tanh_sq(u);
    }
  }
  return s;
}

std::vector<double> critic_targets(const SacAgent& agent, const Batch& batch, const Matrix& next_noise) {
  const PolicySample next = sample_policy(agent.policy, batch.next_obs, next_noise);
  const Matrix in = concat_columns(batch.next_obs, next.action);
  const Matrix t1 = agent.q1_target.forward(in);
  const Matrix t2 = agent.q2_target.forward(in);
  const double alpha = agent.alpha();
  std::vector<double> y(batch.size());
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double soft_value = std::min(t1.data[r], t2.data[r]) - alpha * next.log_prob[r];
    y[r] = batch.reward[r] + agent.config.discount * (1.0 - batch.done[r]) * soft_value;
  }
  return y;
}

double critic_loss(const Mlp& q, const Batch& batch, const std::vector<double>& targets, std::vector<double>* grad) {
  const Matrix in = concat_columns(batch.obs, batch.action);
  Mlp::Tape tape;
  const Matrix& out = q.forward(in, tape);
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  Matrix upstream(batch.size(), 1);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const double d = out.data[r] - targets[r];
    loss += d * d;
    upstream.data[r] = 2.0 * d / n;
  }
  if (grad) q.backward(tape, upstream, *grad);
  return loss / n;
}

double actor_loss(const Mlp& policy, const Mlp& q1, const Mlp& q2, const Matrix& obs, const Matrix& noise,
                  double alpha, std::vector<double>* grad, std::vector<double>* log_probs) {
  Mlp::Tape ptape;
  const PolicySample s = sample_policy(policy, obs, noise, &ptape);
  const Matrix in = concat_columns(obs, s.action);
  Mlp::Tape t1, t2;
  const Matrix& v1 = q1.forward(in, t1);
  const Matrix& v2 = q2.forward(in, t2);
  const std::size_t n = obs.rows;
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  Matrix up1(n, 1), up2(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    const bool first = v1.data[r] <= v2.data[r];
    loss += alpha * s.log_prob[r] - (first ? v1.data[r] : v2.data[r]);
    (first ? up1 : up2).data[r] = -inv_n;
  }
  if (log_probs) *log_probs = s.log_prob;
  if (!grad) return loss * inv_n;

  std::vector<double> scratch1(q1.param_count(), 0.0), scratch2(q2.param_count(), 0.0);
  const Matrix din1 = q1.backward(t1, up1, scratch1);
  const Matrix din2 = q2.backward(t2, up2, scratch2);
  Matrix upstream(n, 2 * kAct);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < kAct; ++j) {
      const double a = s.action(r, j);
      const double dq_da = din1(r, kObs + j) + din2(r, kObs + j);
      // d log pi / du = 2 tanh(u); d log pi / d log_std = -1 (xi fixed)
      const double du = dq_da * (1.0 - a * a) + alpha * inv_n * 2.0 * a;
      const double sigma_xi = std::exp(s.log_std(r, j)) * noise(r, j);
      upstream(r, j) = du;
      const double raw = s.raw_log_std(r, j);
      const bool clamped = raw < kLogStdMin || raw > kLogStdMax;
      upstream(r, kAct + j) = clamped ? 0.0 : du * sigma_xi - alpha * inv_n;
    }
  }
  policy.backward(ptape, upstream, *grad);
  return loss * inv_n;
}

double temperature_loss(double log_alpha, const std::vector<double>& log_probs, double target_entropy, double* grad) {
  double mean = 0.0;
  for (double lp : log_probs) mean += lp + target_entropy;
  mean /= static_cast<double>(log_probs.size());
  const double alpha = std::exp(log_alpha);
  if (grad) *grad += -alpha * mean;
  return -alpha * mean;
}

void soft_update(SacAgent& agent, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("soft-update rate must lie in [0, 1]");
  auto blend = [rho](const Mlp& src, Mlp& dst) {
    auto s = src.params();
    auto d = dst.params();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = rho * s[i] + (1.0 - rho) * d[i];
  };
  blend(agent.q1, agent.q1_target);
  blend(agent.q2, agent.q2_target);
}

Losses update(SacAgent& agent, const Batch& batch) {
  const std::size_t n = batch.size();
  Losses l;

  const Matrix next_noise = normal_matrix(n, kAct, agent.rng);
  const std::vector<double> y = critic_targets(agent, batch, next_noise);
  std::vector<double> g1(agent.q1.param_count(), 0.0), g2(agent.q2.param_count(), 0.0);
  l.q1 = critic_loss(agent.q1, batch, y, &g1);
  l.q2 = critic_loss(agent.q2, batch, y, &g2);
  require_finite(l.q1, "loss_q1");
  require_finite(l.q2, "loss_q2");
  adam_step(agent.q1_opt, agent.q1.params(), g1, "loss_q1");
  adam_step(agent.q2_opt, agent.q2.params(), g2, "loss_q2");

  const Matrix noise = normal_matrix(n, kAct, agent.rng);
  std::vector<double> gp(agent.policy.param_count(), 0.0);
  std::vector<double> log_probs;
  l.pi = actor_loss(agent.policy, agent.q1, agent.q2, batch.obs, noise, agent.alpha(), &gp, &log_probs);
  require_finite(l.pi, "loss_pi");
  adam_step(agent.policy_opt, agent.policy.params(), gp, "loss_pi");

  if (agent.config.auto_temperature) {
    double ga = 0.0;
    l.alpha_loss = temperature_loss(agent.log_alpha, log_probs, agent.config.target_entropy, &ga);
    require_finite(l.alpha_loss, "loss_alpha");
    const double g[1] = {ga};
    adam_step(agent.alpha_opt, std::span<double>(&agent.log_alpha, 1), g, "loss_alpha");
  }
  soft_update(agent, agent.config.polyak);
  l.alpha = agent.alpha();
  return l;
}

std::string to_json_line(const EpisodeMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["episode"] = m.episode;
  j["return"] = m.episode_return;
  j["rmse_roll"] = m.rmse_roll;
  j["rmse_gamma"] = m.rmse_gamma;
  j["rmse_yaw"] = m.rmse_yaw;
  j["rmse_mach"] = m.rmse_mach;
  j["loss_q1"] = m.losses.q1;
  j["loss_q2"] = m.losses.q2;
  j["loss_pi"] = m.losses.pi;
  j["alpha"] = m.losses.alpha;
  return j.dump();
}

std::uint64_t episode_seed(std::uint64_t base, std::uint64_t k) { return derive(base, 1000 + k); }

namespace {

struct ErrorAccumulator {
  double roll = 0.0, gamma = 0.0, yaw = 0.0, mach = 0.0, abs_gamma = 0.0;
  std::size_t n = 0;

  void add(const env::StepInfo& info) {
    if (info.fault) return;
    const double er = reward::wrap_angle_error(info.target.roll_deg, info.measured.roll_deg);
    const double eg = info.target.gamma_deg - info.measured.gamma_deg;
    const double ey = reward::wrap_angle_error(info.target.yaw_deg, info.measured.yaw_deg);
    const double em = info.target.mach - info.measured.mach;
    roll += er * er;
    gamma += eg * eg;
    yaw += ey * ey;
    mach += em * em;
    abs_gamma += std::abs(eg);
    ++n;
  }
  void fill(EpisodeMetrics& m) const {
    const double d = n > 0 ? static_cast<double>(n) : 1.0;
    m.rmse_roll = std::sqrt(roll / d);
    m.rmse_gamma = std::sqrt(gamma / d);
    m.rmse_yaw = std::sqrt(yaw / d);
    m.rmse_mach = std::sqrt(mach / d);
    m.mean_abs_gamma = abs_gamma / d;
  }
};

}  // namespace

TrainResult train(const EnvFactory& factory, const SacConfig& config, const env::EpisodeConfig& episode_config,
                  std::size_t total_steps, const TrainCallbacks& callbacks) {
  return train(SacAgent::create(config), factory, episode_config, total_steps, callbacks);
}

TrainResult train(SacAgent agent, const EnvFactory& factory, const env::EpisodeConfig& episode_config,
                  std::size_t total_steps, const TrainCallbacks& callbacks) {
  TrainResult result{std::move(agent), {}, 0};
  SacAgent& a = result.agent;
  if (total_steps == 0) return result;

  const SacConfig& cfg = a.config;
  env::Environment environment = factory ? factory(episode_config) : env::Environment(episode_config);
  ReplayBuffer buffer(cfg.capacity);
  std::mt19937_64 rng(derive(cfg.seed, 5));
  std::uniform_real_distribution<double> uniform_action(-1.0, 1.0);

  std::size_t episode = 0;
  env::Observation obs = environment.reset(episode_seed(episode_config.seed, episode));
  EpisodeMetrics current;
  ErrorAccumulator errors;
  Losses last_losses{0.0, 0.0, 0.0, 0.0, a.alpha()};

  for (std::size_t step = 0; step < total_steps; ++step) {
    env::Action action{};
    if (step < cfg.warmup) {
      for (double& v : action) v = uniform_action(rng);
    } else {
      action = select_action(a, obs, false, rng).action;
    }
    const env::StepResult res = environment.step(action);
    const bool done = res.terminated || res.truncated;
    buffer.push({obs, action, res.reward, res.observation, done});
    current.episode_return += res.reward;
    ++current.length;
    errors.add(res.info);
    obs = res.observation;

    if (step + 1 >= cfg.warmup && buffer.size() >= cfg.batch) {
      for (std::size_t u = 0; u < cfg.updates_per_step; ++u) {
        try {
          last_losses = update(a, buffer.sample(cfg.batch, rng));
        } catch (const TrainingFault& fault) {
          if (callbacks.on_fault) callbacks.on_fault(a, fault);
          throw;
        }
      }
    }

    if (done) {
      current.step = step + 1;
      current.episode = episode;
      current.losses = last_losses;
      current.terminated = res.terminated;
      errors.fill(current);
      result.metrics.push_back(current);
      if (callbacks.on_episode) callbacks.on_episode(current);
      ++episode;
      current = EpisodeMetrics{};
      errors = ErrorAccumulator{};
      obs = environment.reset(episode_seed(episode_config.seed, episode));
    }
  }
  result.steps = total_steps;
  return result;
}

double evaluation_reward(const SacAgent& agent, const env::EpisodeConfig& episode_config, std::size_t episodes,
                         std::uint64_t seed) {
  env::Environment environment(episode_config, false);
  std::mt19937_64 unused(0);
  double total = 0.0;
  std::size_t steps = 0;
  for (std::size_t k = 0; k < episodes; ++k) {
    env::Observation obs = environment.reset(episode_seed(seed, k));
    for (;;) {
      const env::StepResult res = environment.step(select_action(agent, obs, true, unused).action);
      total += res.reward;
      ++steps;
      obs = res.observation;
      if (res.terminated || res.truncated) break;
    }
  }
  return steps > 0 ? total / static_cast<double>(steps) : 0.0;
}

// ---- hyper-parameter search ----

SearchSpace parse_search_space(std::istream& in) {
  SearchSpace space;
  for (const kv::Entry& e : kv::parse(in)) {
    ParamRange r;
    const std::string& v = e.value;
    auto inside = [&](char open, char close) {
      const auto b = v.find(open);
      const auto c = v.rfind(close);
      if (b == std::string::npos || c == std::string::npos || c < b) throw ParseError("malformed range", e.line, e.key);
      return v.substr(b + 1, c - b - 1);
    };
    if (v.starts_with("log(") || v.starts_with("uniform(")) {
      r.kind = v.starts_with("log(") ? ParamRange::Kind::kLogUniform : ParamRange::Kind::kUniform;
      const auto parts = kv::split(inside('(', ')'), ',');
      if (parts.size() != 2) throw ParseError("range needs two bounds", e.line, e.key);
      try {
        r.lo = kv::to_double(parts[0], e.key);
        r.hi = kv::to_double(parts[1], e.key);
      } catch (const ParseError&) {
        throw ParseError("range bounds must be numbers", e.line, e.key);
      }
      if (!(r.hi >= r.lo) || (r.kind == ParamRange::Kind::kLogUniform && !(r.lo > 0.0))) {
        throw ParseError("invalid range bounds", e.line, e.key);
      }
    } else if (v.starts_with("{")) {
      r.kind = ParamRange::Kind::kChoice;
      r.choices = kv::split(inside('{', '}'), ',');
      if (r.choices.empty() || r.choices.front().empty()) throw ParseError("empty choice set", e.line, e.key);
    } else {
      throw ParseError("expected log(a, b), uniform(a, b) or {a, b, ...}", e.line, e.key);
    }
    space.params.emplace_back(e.key, std::move(r));
  }
  return space;
}

SearchSpace load_search_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open search space '" + path + "'");
  return parse_search_space(in);
}

void apply_param(SacConfig& c, const std::string& key, const std::string& value) {
  auto num = [&] { return kv::to_double(value, key); };
  auto count = [&] {
    const long long v = kv::to_int(value, key);
    if (v <= 0) throw ConfigError("'" + key + "' must be a positive integer");
    return static_cast<std::size_t>(v);
  };
  if (key == "lr") {
    c.lr_actor = c.lr_critic = c.lr_alpha = num();
  } else if (key == "lr_actor") {
    c.lr_actor = num();
  } else if (key == "lr_critic") {
    c.lr_critic = num();
  } else if (key == "lr_alpha") {
    c.lr_alpha = num();
  } else if (key == "discount" || key == "gamma") {
    c.discount = num();
  } else if (key == "polyak" || key == "rho") {
    c.polyak = num();
  } else if (key == "batch") {
    c.batch = count();
  } else if (key == "capacity") {
    c.capacity = count();
  } else if (key == "warmup") {
    c.warmup = static_cast<std::size_t>(std::max(0LL, kv::to_int(value, key)));
  } else if (key == "updates_per_step") {
    c.updates_per_step = count();
  } else if (key == "target_entropy") {
    c.target_entropy = num();
  } else if (key == "auto_temperature") {
    c.auto_temperature = kv::to_bool(value, key);
  } else if (key == "init_alpha") {
    c.init_alpha = num();
  } else if (key == "hidden") {
    std::vector<std::size_t> h;
    for (const auto& part : kv::split(value, 'x')) {
      const long long v = kv::to_int(part, key);
      if (v <= 0) throw ConfigError("hidden sizes must be positive");
      h.push_back(static_cast<std::size_t>(v));
    }
    c.hidden = h;
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(kv::to_int(value, key));
  } else {
    throw ConfigError("unknown SAC parameter '" + key + "'");
  }
}

SearchResult hparam_search(const SearchSpace& space, const SacConfig& base, const env::EpisodeConfig& episode_config,
                           std::size_t trials, std::size_t budget_steps, std::uint64_t seed,
                           std::size_t eval_episodes) {
  std::mt19937_64 rng(derive(seed, 6));
  std::vector<TrialResult> table;
  // Choice sets are drawn from shuffled decks so every option is tried once
  // per pass through the deck.
  std::vector<std::vector<std::size_t>> decks(space.params.size());
  for (std::size_t t = 0; t < trials; ++t) {
    TrialResult trial;
    trial.index = t;
    trial.config = base;
    for (std::size_t p = 0; p < space.params.size(); ++p) {
      const auto& [key, range] = space.params[p];
      std::string value;
      if (range.kind == ParamRange::Kind::kChoice) {
        auto& deck = decks[p];
        if (deck.empty()) {
          deck.resize(range.choices.size());
          std::iota(deck.begin(), deck.end(), std::size_t{0});
          std::shuffle(deck.begin(), deck.end(), rng);
        }
        value = range.choices[deck.back()];
        deck.pop_back();
      } else if (range.kind == ParamRange::Kind::kLogUniform) {
        std::uniform_real_distribution<double> u(std::log(range.lo), std::log(range.hi));
        value = kv::format_double(std::exp(u(rng)));
      } else {
        std::uniform_real_distribution<double> u(range.lo, range.hi);
        value = kv::format_double(u(rng));
      }
      trial.values[key] = value;
    }
    try {
      for (const auto& [key, value] : trial.values) apply_param(trial.config, key, value);
      trial.config.seed = derive(seed, 100 + t);
      TrainResult run = train(SacAgent::create(trial.config), {}, episode_config, budget_steps);
      trial.parameter_count = run.agent.parameter_count();
      trial.score = evaluation_reward(run.agent, episode_config, eval_episodes, derive(seed, 7));
      if (!std::isfinite(trial.score)) throw TrainingFault("evaluation reward");
    } catch (const Error& e) {
      trial.failed = true;
      trial.error = e.what();
      trial.score = -std::numeric_limits<double>::infinity();
    }
    table.push_back(std::move(trial));
  }
  std::stable_sort(table.begin(), table.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.failed != b.failed) return !a.failed;
    if (a.score != b.score) return a.score > b.score;
    if (a.parameter_count != b.parameter_count) return a.parameter_count < b.parameter_count;
    return a.index < b.index;
  });
  SearchResult r{std::move(table), base};
  if (!r.table.empty() && !r.table.front().failed) r.best = r.table.front().config;
  return r;
}

}  // namespace amrl::sac
