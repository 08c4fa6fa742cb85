#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"

#include "amrl/error.hpp"
#include "amrl/sac.hpp"

using namespace amrl;
using namespace amrl::sac;

namespace {

SacConfig small_config() {
  SacConfig c;
  c.hidden = {16, 16};
  c.batch = 32;
  c.warmup = 100;
  c.capacity = 5000;
  c.seed = 3;
  return c;
}

env::EpisodeConfig hold_task() {
  env::EpisodeConfig e;
  e.maneuver = trajectory::generate_level(5.0, 0.0, 0.6, 0.1);
  return e;
}

Batch random_batch(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0), u11(-1.0, 1.0);
  Batch b;
  b.obs = Matrix(n, env::kObservationSize);
  b.next_obs = Matrix(n, env::kObservationSize);
  b.action = Matrix(n, env::kActionSize);
  for (double& v : b.obs.data) v = u01(rng);
  for (double& v : b.next_obs.data) v = u01(rng);
  for (double& v : b.action.data) v = u11(rng);
  for (std::size_t i = 0; i < n; ++i) {
    b.reward.push_back(u11(rng));
    b.done.push_back(i % 3 == 0 ? 1.0 : 0.0);
  }
  return b;
}

Matrix normal_noise(std::size_t rows, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, env::kActionSize);
  for (double& v : m.data) v = n(rng);
  return m;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Plain-loop forward pass used as an independent oracle.
std::vector<double> hand_forward(const Mlp& net, std::vector<double> x) {
  for (std::size_t l = 0; l < net.layers(); ++l) {
    const std::size_t in = net.dims()[l], out = net.dims()[l + 1];
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = net.params()[net.bias_offset(l) + o];
      for (std::size_t i = 0; i < in; ++i) acc += x[i] * net.params()[net.weight_offset(l) + o * in + i];
      y[o] = (l + 1 < net.layers()) ? std::max(acc, 0.0) : acc;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_CASE("stochastic actions stay strictly inside the unit box") {
  SacConfig c = small_config();
  SacAgent agent = SacAgent::create(c);
  // Large output bias pushes tanh towards saturation.
  agent.policy.params()[agent.policy.bias_offset(agent.policy.layers() - 1)] = 30.0;
  agent.policy.params()[agent.policy.bias_offset(agent.policy.layers() - 1) + 4] = 2.0;
  std::mt19937_64 rng(1);
  env::Observation obs{};
  obs.fill(0.5);
  for (int i = 0; i < 100000; ++i) {
    const ActionSample s = select_action(agent, obs, false, rng);
    for (double a : s.action) REQUIRE((a > -1.0 && a < 1.0));
    REQUIRE(std::isfinite(s.log_prob));
  }
}

TEST_CASE("vanishing sigma reduces to the deterministic action") {
  SacAgent agent = SacAgent::create(small_config());
  const std::size_t last = agent.policy.layers() - 1;
  const std::size_t in = agent.policy.dims()[last];
  for (std::size_t j = 4; j < 8; ++j) {
    for (std::size_t i = 0; i < in; ++i) agent.policy.params()[agent.policy.weight_offset(last) + j * in + i] = 0.0;
    agent.policy.params()[agent.policy.bias_offset(last) + j] = kLogStdMin;
  }
  std::mt19937_64 rng(2);
  env::Observation obs{};
  obs.fill(0.3);
  const ActionSample det = select_action(agent, obs, true, rng);
  for (int k = 0; k < 100; ++k) {
    const ActionSample s = select_action(agent, obs, false, rng);
    for (std::size_t j = 0; j < 4; ++j) CHECK(s.action[j] == doctest::Approx(det.action[j]).epsilon(1e-7));
  }
}

TEST_CASE("squashed log-density matches a numerical oracle") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> mean(-1.5, 1.5), log_std(-2.0, 1.0);
  std::normal_distribution<double> xi(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double m = mean(rng), ls = log_std(rng), x = xi(rng);
    const double sigma = std::exp(ls);
    const double a = std::tanh(m + sigma * x);
    if (std::abs(a) > 0.999) continue;
    // Density of a as the derivative of its CDF, P(A <= a) = Phi((atanh(a) - m) / sigma).
    const double h = 1e-5 * (1.0 - a * a);
    const double cdf_hi = normal_cdf((std::atanh(a + h) - m) / sigma);
    const double cdf_lo = normal_cdf((std::atanh(a - h) - m) / sigma);
    const double density = (cdf_hi - cdf_lo) / (2.0 * h);
    CHECK(squashed_log_prob(m, ls, x) == doctest::Approx(std::log(density)).epsilon(1e-6));
  }
  // The density integrates to one over (-1, 1) (Simpson in u = atanh(a)).
  const double m = 0.4, ls = -0.3, sigma = std::exp(ls);
  const int n = 20000;
  const double lo = m - 12.0 * sigma, hi = m + 12.0 * sigma, du = (hi - lo) / n;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = lo + du * i;
    const double a = std::tanh(u);
    const double pa = std::exp(squashed_log_prob(m, ls, (u - m) / sigma));
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    integral += w * pa * (1.0 - a * a);
  }
  CHECK(integral * du / 3.0 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("replay buffer eviction, seeding and uniformity") {
  ReplayBuffer b(3);
  for (int i = 0; i < 4; ++i) {
    Transition t;
    t.reward = i;
    b.push(t);
  }
  CHECK(b.size() == 3);
  CHECK(b.at(0).reward == 1.0);
  CHECK(b.at(2).reward == 3.0);

  ReplayBuffer ten(10);
  for (int i = 0; i < 10; ++i) {
    Transition t;
    t.reward = i;
    ten.push(t);
  }
  std::mt19937_64 r1(5), r2(5);
  CHECK(ten.sample_indices(10, r1) == ten.sample_indices(10, r2));
  std::mt19937_64 s1(6), s2(6);
  CHECK(ten.sample(8, s1).reward == ten.sample(8, s2).reward);

  std::mt19937_64 rng(7);
  std::vector<double> counts(10, 0.0);
  const std::size_t draws = 100000;
  for (std::size_t k = 0; k < draws / 10; ++k) {
    for (std::size_t i : ten.sample_indices(10, rng)) counts[i] += 1.0;
  }
  const double expected = draws / 10.0;
  const double sd = std::sqrt(draws * 0.1 * 0.9);
  for (double c : counts) CHECK(std::abs(c - expected) <= 3.0 * sd);

  std::mt19937_64 r(0);
  CHECK_THROWS_AS(ten.sample(11, r), Error);
  CHECK_THROWS_AS(ReplayBuffer(0), Error);
}

TEST_CASE("critic target examples") {
  SacConfig c = small_config();
  SacAgent agent = SacAgent::create(c);
  std::mt19937_64 rng(8);
  Batch b = random_batch(16, rng);
  const Matrix noise = normal_noise(16, rng);
  std::fill(b.done.begin(), b.done.end(), 1.0);
  CHECK(critic_targets(agent, b, noise) == b.reward);

  std::fill(b.done.begin(), b.done.end(), 0.0);
  agent.config.discount = 0.0;
  CHECK(critic_targets(agent, b, noise) == b.reward);
}

TEST_CASE("single-transition critic target matches a hand evaluation") {
  SacConfig c = small_config();
  c.init_alpha = 0.37;
  c.discount = 0.97;
  const SacAgent agent = SacAgent::create(c);
  std::mt19937_64 rng(9);
  Batch b = random_batch(1, rng);
  b.done[0] = 0.0;
  const Matrix noise = normal_noise(1, rng);

  std::vector<double> next(b.next_obs.data);
  const std::vector<double> out = hand_forward(agent.policy, next);
  std::vector<double> q_in = next;
  double log_prob = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    const double ls = std::clamp(out[4 + j], kLogStdMin, kLogStdMax);
    const double u = out[j] + std::exp(ls) * noise(0, j);
    q_in.push_back(std::tanh(u));
    const double density = std::exp(-0.5 * noise(0, j) * noise(0, j)) / (std::exp(ls) * std::sqrt(2.0 * std::numbers::pi));
    log_prob += std::log(density) - std::log(1.0 - std::tanh(u) * std::tanh(u));
  }
  const double q = std::min(hand_forward(agent.q1_target, q_in)[0], hand_forward(agent.q2_target, q_in)[0]);
  const double expected = b.reward[0] + 0.97 * (q - 0.37 * log_prob);
  CHECK(std::abs(critic_targets(agent, b, noise)[0] - expected) <= 1e-12);
}

TEST_CASE("soft update examples") {
  SacAgent agent = SacAgent::create(small_config());
  const std::vector<double> theta(agent.q1.params().begin(), agent.q1.params().end());
  const Mlp initial_target = agent.q1_target;
  for (double& v : agent.q1_target.params()) v += 1.0;
  const std::vector<double> t0(agent.q1_target.params().begin(), agent.q1_target.params().end());

  soft_update(agent, 0.0);
  CHECK(std::vector<double>(agent.q1_target.params().begin(), agent.q1_target.params().end()) == t0);

  soft_update(agent, 0.5);
  soft_update(agent, 0.5);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    CHECK(agent.q1_target.params()[i] == doctest::Approx(0.75 * theta[i] + 0.25 * t0[i]).epsilon(1e-15));
  }
  soft_update(agent, 1.0);
  CHECK(agent.q1_target == agent.q1);
  CHECK(agent.q2_target == agent.q2);
  CHECK_THROWS_AS(soft_update(agent, 1.5), Error);
  (void)initial_target;
}

TEST_CASE("SAC loss gradients pass finite differences") {
  SacConfig c = small_config();
  c.init_alpha = 0.2;
  SacAgent agent = SacAgent::create(c);
  std::mt19937_64 rng(10);
  const Batch b = random_batch(8, rng);
  const Matrix next_noise = normal_noise(8, rng);
  const Matrix noise = normal_noise(8, rng);
  const std::vector<double> y = critic_targets(agent, b, next_noise);

  std::vector<double> gq(agent.q1.param_count(), 0.0);
  critic_loss(agent.q1, b, y, &gq);
  auto q_loss = [&](std::span<const double> p) {
    return critic_loss(Mlp(agent.q1.dims(), std::vector<double>(p.begin(), p.end())), b, y, nullptr);
  };
  const auto rq = netopt::check_gradient(q_loss, gq, {agent.q1.params().begin(), agent.q1.params().end()}, 1e-4);
  CHECK(rq.passed);

  std::vector<double> gp(agent.policy.param_count(), 0.0);
  actor_loss(agent.policy, agent.q1, agent.q2, b.obs, noise, agent.alpha(), &gp);
  auto pi_loss = [&](std::span<const double> p) {
    return actor_loss(Mlp(agent.policy.dims(), std::vector<double>(p.begin(), p.end())), agent.q1, agent.q2, b.obs,
                      noise, agent.alpha(), nullptr);
  };
  const auto rp =
      netopt::check_gradient(pi_loss, gp, {agent.policy.params().begin(), agent.policy.params().end()}, 1e-4);
  CHECK(rp.passed);
  MESSAGE("critic " << rq.max_relative_error << " actor " << rp.max_relative_error);

  const std::vector<double> log_probs{-1.3, 0.4, -6.0, 2.2};
  double ga = 0.0;
  temperature_loss(0.3, log_probs, -4.0, &ga);
  auto t_loss = [&](std::span<const double> p) { return temperature_loss(p[0], log_probs, -4.0, nullptr); };
  CHECK(netopt::check_gradient(t_loss, std::vector<double>{ga}, {0.3}, 1e-4).passed);
}

TEST_CASE("temperature stays positive and frozen without auto tuning") {
  SacConfig c = small_config();
  c.auto_temperature = false;
  c.init_alpha = 0.05;
  SacAgent agent = SacAgent::create(c);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5; ++i) update(agent, random_batch(32, rng));
  CHECK(agent.alpha() == doctest::Approx(0.05).epsilon(1e-15));

  SacAgent tuned = SacAgent::create(small_config());
  for (int i = 0; i < 5; ++i) {
    const Losses l = update(tuned, random_batch(32, rng));
    CHECK(l.alpha > 0.0);
  }
}

TEST_CASE("non-finite losses raise a training fault naming the loss") {
  SacAgent agent = SacAgent::create(small_config());
  std::mt19937_64 rng(12);
  Batch b = random_batch(32, rng);
  b.reward[3] = std::nan("");
  try {
    update(agent, b);
    FAIL("expected a training fault");
  } catch (const TrainingFault& e) {
    CHECK(std::string(e.what()).find("loss_q1") != std::string::npos);
  }
}

TEST_CASE("training with zero steps returns the untrained agent") {
  const SacConfig c = small_config();
  const TrainResult r = train({}, c, hold_task(), 0);
  CHECK(r.metrics.empty());
  CHECK(r.agent.policy == SacAgent::create(c).policy);
}

TEST_CASE("training is deterministic for fixed seeds") {
  const SacConfig c = small_config();
  std::ostringstream a, b;
  const TrainResult r1 = train({}, c, hold_task(), 600);
  const TrainResult r2 = train({}, c, hold_task(), 600);
  REQUIRE(r1.metrics.size() == 12);
  for (const auto& m : r1.metrics) a << to_json_line(m) << '\n';
  for (const auto& m : r2.metrics) b << to_json_line(m) << '\n';
  CHECK(a.str() == b.str());
  CHECK(r1.agent.policy == r2.agent.policy);
  CHECK(r1.agent.q2_target == r2.agent.q2_target);

  SacConfig other = c;
  other.seed = 4;
  CHECK_FALSE(train({}, other, hold_task(), 600).agent.policy == r1.agent.policy);
}

TEST_CASE("metrics lines use the fixed field names") {
  EpisodeMetrics m;
  m.step = 10;
  m.episode_return = 1.5;
  const std::string line = to_json_line(m);
  CHECK(line.rfind("{\"step\":10,\"episode\":0,\"return\":1.5,\"rmse_roll\":", 0) == 0);
  for (const char* k : {"rmse_gamma", "rmse_yaw", "rmse_mach", "loss_q1", "loss_q2", "loss_pi", "alpha"}) {
    CHECK(line.find(std::string("\"") + k + "\"") != std::string::npos);
  }
}

TEST_CASE("search space parsing") {
  std::istringstream in("lr_actor = log(1e-5, 1e-2)\nbatch = {64,128,256}\npolyak = uniform(0.001, 0.01)\n");
  const SearchSpace s = parse_search_space(in);
  REQUIRE(s.params.size() == 3);
  CHECK(s.params[0].second.kind == ParamRange::Kind::kLogUniform);
  CHECK(s.params[1].second.choices == std::vector<std::string>{"64", "128", "256"});
  CHECK(s.params[2].second.hi == 0.01);
  std::istringstream bad("lr_actor = log(0, 1)\n");
  CHECK_THROWS_AS(parse_search_space(bad), Error);
  SacConfig c;
  CHECK_THROWS_AS(apply_param(c, "momentum", "0.9"), ConfigError);
  apply_param(c, "hidden", "32x16");
  CHECK(c.hidden == std::vector<std::size_t>{32, 16});
}

TEST_CASE("hyper-parameter search examples") {
  SacConfig base = small_config();
  base.warmup = 50;
  const env::EpisodeConfig task = hold_task();

  std::istringstream one_in("batch = {16, 32}\n");
  const SearchSpace one = parse_search_space(one_in);
  const SearchResult r1 = hparam_search(one, base, task, 1, 200, 5, 1);
  REQUIRE(r1.table.size() == 1);
  CHECK(r1.best == r1.table[0].config);

  const SearchResult r2 = hparam_search(one, base, task, 2, 200, 5, 1);
  const SearchResult r3 = hparam_search(one, base, task, 2, 200, 5, 1);
  REQUIRE(r2.table.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(r2.table[i].score == r3.table[i].score);
    CHECK(r2.table[i].values == r3.table[i].values);
  }

  std::istringstream lr_in("lr = {1.0, 0.0003}\n");
  const SearchSpace lr = parse_search_space(lr_in);
  SacConfig sane = base;
  sane.warmup = 200;
  const SearchResult r4 = hparam_search(lr, sane, task, 2, 3000, 9, 2);
  REQUIRE(r4.table.size() == 2);
  CHECK(r4.table[0].values.at("lr") == "0.0003");
  CHECK(r4.table[1].values.at("lr") == "1.0");
  MESSAGE("sane " << r4.table[0].score << " bad " << r4.table[1].score << " failed " << r4.table[1].failed);
}
