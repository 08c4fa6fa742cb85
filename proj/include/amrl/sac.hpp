#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "amrl/environment.hpp"
#include "amrl/error.hpp"
#include "amrl/netopt.hpp"

namespace amrl::sac {

using netopt::Matrix;
using netopt::Mlp;

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct SacConfig {
  double discount = 0.99;
  double polyak = 0.005;  // soft-update rate
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  double lr_alpha = 3e-4;
  std::size_t batch = 256;
  std::size_t capacity = 100000;
  std::size_t warmup = 1000;
  std::size_t updates_per_step = 1;
  double target_entropy = -static_cast<double>(env::kActionSize);
  bool auto_temperature = true;
  double init_alpha = 0.01;
  std::vector<std::size_t> hidden{64, 64};
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const SacConfig&) const = default;
};

struct Transition {
  env::Observation obs{};
  env::Action action{};
  double reward = 0.0;
  env::Observation next_obs{};
  bool done = false;
};

struct Batch {
  Matrix obs;
  Matrix action;
  std::vector<double> reward;
  Matrix next_obs;
  std::vector<double> done;
  std::size_t size() const { return reward.size(); }
};

/// Fixed-capacity FIFO ring with uniform sampling with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  /// Throws Error when fewer than batch items are stored.
  Batch sample(std::size_t batch, std::mt19937_64& rng) const;
  /// Indices sample() would draw, without building the batch.
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  /// i-th oldest stored transition.
  const Transition& at(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;  // next write position
  std::vector<Transition> items_;
};

struct SacAgent {
  SacConfig config;
  Mlp policy;  // obs -> (mean[4], log_std[4])
  Mlp q1, q2;  // (obs, action) -> value
  Mlp q1_target, q2_target;
  double log_alpha = 0.0;
  netopt::AdamState policy_opt, q1_opt, q2_opt, alpha_opt;
  std::mt19937_64 rng;  // noise used inside update()

  static SacAgent create(const SacConfig& config);
  double alpha() const;
  std::size_t parameter_count() const { return policy.param_count() + q1.param_count() + q2.param_count(); }
  void set_backend(netopt::Backend b);
};

struct ActionSample {
  env::Action action{};
  double log_prob = 0.0;
};

/// Stochastic: tanh(mu + sigma * xi) with the tanh-corrected log-density.
/// Deterministic: tanh(mu), log_prob left at 0.
ActionSample select_action(const SacAgent& agent, const env::Observation& obs, bool deterministic,
                           std::mt19937_64& rng);

/// Log-density of a = tanh(mu + sigma * xi) evaluated through xi and u.
double squashed_log_prob(double mean, double log_std, double xi);

struct Losses {
  double q1 = 0.0;
  double q2 = 0.0;
  double pi = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
};

/// Policy evaluation at a batch of observations with fixed standard-normal noise.
struct PolicySample {
  Matrix action;    // rows x 4, squashed
  std::vector<double> log_prob;
  Matrix pre_tanh;  // u
  Matrix mean;
  Matrix log_std;   // after clamp
  Matrix raw_log_std;
};
PolicySample sample_policy(const Mlp& policy, const Matrix& obs, const Matrix& noise, Mlp::Tape* tape = nullptr);

Matrix concat_columns(const Matrix& a, const Matrix& b);

/// y = r + discount * (1 - done) * (min(Q1', Q2')(s', a') - alpha * log pi(a'|s'))
std::vector<double> critic_targets(const SacAgent& agent, const Batch& batch, const Matrix& next_noise);

/// mean((Q(s, a) - y)^2); adds gradient into grad when non-null.
double critic_loss(const Mlp& q, const Batch& batch, const std::vector<double>& targets,
                   std::vector<double>* grad);

/// mean(alpha * log pi(a~|s) - min(Q1, Q2)(s, a~)) with a~ reparameterized
/// from noise. Adds the policy gradient into grad when non-null.
double actor_loss(const Mlp& policy, const Mlp& q1, const Mlp& q2, const Matrix& obs, const Matrix& noise,
                  double alpha, std::vector<double>* grad, std::vector<double>* log_probs = nullptr);

/// -alpha * mean(log pi + target_entropy), differentiated in log alpha.
double temperature_loss(double log_alpha, const std::vector<double>& log_probs, double target_entropy,
                        double* grad);

/// theta' <- rho * theta + (1 - rho) * theta'
void soft_update(SacAgent& agent, double rho);

/// One full SAC update on a batch. Throws TrainingFault on a non-finite loss.
Losses update(SacAgent& agent, const Batch& batch);

/// Per-episode training record; field names match metrics.jsonl.
struct EpisodeMetrics {
  std::size_t step = 0;
  std::size_t episode = 0;
  double episode_return = 0.0;
  std::size_t length = 0;
  double rmse_roll = 0.0;
  double rmse_gamma = 0.0;
  double rmse_yaw = 0.0;
  double rmse_mach = 0.0;
  double mean_abs_gamma = 0.0;
  Losses losses;
  bool terminated = false;
};

std::string to_json_line(const EpisodeMetrics& m);

struct TrainCallbacks {
  std::function<void(const EpisodeMetrics&)> on_episode;
  /// Called with the agent before a training fault propagates.
  std::function<void(const SacAgent&, const TrainingFault&)> on_fault;
};

using EnvFactory = std::function<env::Environment(const env::EpisodeConfig&)>;

struct TrainResult {
  SacAgent agent;
  std::vector<EpisodeMetrics> metrics;
  std::size_t steps = 0;
};

/// Seed of the k-th training episode (0-based).
std::uint64_t episode_seed(std::uint64_t base, std::uint64_t k);

TrainResult train(const EnvFactory& factory, const SacConfig& config, const env::EpisodeConfig& episode_config,
                  std::size_t total_steps, const TrainCallbacks& callbacks = {});

/// Continues training an existing agent (fresh buffer).
TrainResult train(SacAgent agent, const EnvFactory& factory, const env::EpisodeConfig& episode_config,
                  std::size_t total_steps, const TrainCallbacks& callbacks = {});

/// Mean per-step reward of deterministic-policy episodes.
double evaluation_reward(const SacAgent& agent, const env::EpisodeConfig& episode_config, std::size_t episodes,
                         std::uint64_t seed);

// ---- hyper-parameter search ----

struct ParamRange {
  enum class Kind { kLogUniform, kUniform, kChoice } kind = Kind::kChoice;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::string> choices;
};

/// key = log(a, b) | uniform(a, b) | {v1, v2, ...}
struct SearchSpace {
  std::vector<std::pair<std::string, ParamRange>> params;
};

SearchSpace parse_search_space(std::istream& in);
SearchSpace load_search_space(const std::string& path);

/// Applies one sampled textual value to a config key; throws ConfigError on
/// an unknown key.
void apply_param(SacConfig& config, const std::string& key, const std::string& value);

struct TrialResult {
  std::size_t index = 0;
  std::map<std::string, std::string> values;
  SacConfig config;
  double score = 0.0;
  std::size_t parameter_count = 0;
  bool failed = false;
  std::string error;
};

struct SearchResult {
  std::vector<TrialResult> table;  // ranked
  SacConfig best;
};

SearchResult hparam_search(const SearchSpace& space, const SacConfig& base, const env::EpisodeConfig& episode_config,
                           std::size_t trials, std::size_t budget_steps, std::uint64_t seed,
                           std::size_t eval_episodes = 5);

}  // namespace amrl::sac
