#include "amrl/harness.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "amrl/error.hpp"
#include "amrl/kv.hpp"

namespace amrl::harness {

namespace {

struct ErrorStats {
  double sq = 0.0, abs = 0.0, max = 0.0;
  void add(double e) {
    sq += e * e;
    abs += std::abs(e);
    max = std::max(max, std::abs(e));
  }
};

EvalReport run_episode(const Policy& policy, env::Environment& environment, env::Observation obs) {
  EvalReport r;
  const double hz = environment.config().agent_hz;
  for (;;) {
    const env::Action action = policy(obs, environment);
    const env::StepResult res = environment.step(action);
    r.episode_return += res.reward;
    ++r.steps;
    if (res.info.fault) {
      r.fault = true;
      r.terminated = true;
      break;
    }
    r.trace.push_back({static_cast<double>(res.info.step) / hz, res.info.target, res.info.measured, action});
    obs = res.observation;
    if (res.terminated) r.terminated = true;
    if (res.terminated || res.truncated) break;
  }
  summarize(r);
  return r;
}

}  // namespace

Policy agent_policy(const sac::SacAgent& agent) {
  return [&agent](const env::Observation& obs, const env::Environment&) {
    std::mt19937_64 unused(0);
    return sac::select_action(agent, obs, true, unused).action;
  };
}

void summarize(EvalReport& r) {
  ErrorStats roll, gamma, yaw, mach;
  for (const TraceRow& row : r.trace) {
    roll.add(reward::wrap_angle_error(row.target.roll_deg, row.actual.roll_deg));
    gamma.add(row.target.gamma_deg - row.actual.gamma_deg);
    yaw.add(reward::wrap_angle_error(row.target.yaw_deg, row.actual.yaw_deg));
    mach.add(row.target.mach - row.actual.mach);
  }
  const double n = r.trace.empty() ? 1.0 : static_cast<double>(r.trace.size());
  r.rmse_roll = std::sqrt(roll.sq / n);
  r.rmse_gamma = std::sqrt(gamma.sq / n);
  r.rmse_yaw = std::sqrt(yaw.sq / n);
  r.rmse_mach = std::sqrt(mach.sq / n);
  r.max_abs_roll = roll.max;
  r.max_abs_gamma = gamma.max;
  r.max_abs_yaw = yaw.max;
  r.max_abs_mach = mach.max;
  r.mean_abs_roll = roll.abs / n;
  r.mean_abs_gamma = gamma.abs / n;
  r.mean_abs_yaw = yaw.abs / n;
  r.mean_abs_mach = mach.abs / n;
}

std::vector<EvalReport> evaluate(const Policy& policy, const env::EpisodeConfig& config, std::size_t episodes,
                                 std::uint64_t seed, const EvalOptions& options) {
  std::vector<EvalReport> reports(episodes);
  auto one = [&](std::size_t k) {
    env::Environment environment(config, false);
    env::ResetOverrides overrides;
    overrides.tau = options.tau;
    const std::uint64_t s = sac::episode_seed(seed, k);
    EvalReport r = run_episode(policy, environment, environment.reset(s, overrides));
    r.episode = k;
    r.seed = s;
    reports[k] = std::move(r);
  };
  const auto n = static_cast<std::ptrdiff_t>(episodes);
#if defined(AMRL_USE_OPENMP)
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, options.workers)) if (options.workers > 1)
#endif
  for (std::ptrdiff_t k = 0; k < n; ++k) one(static_cast<std::size_t>(k));
  return reports;
}

Aggregate aggregate(const std::vector<EvalReport>& reports) {
  Aggregate a;
  a.episodes = reports.size();
  if (reports.empty()) return a;
  for (const EvalReport& r : reports) {
    a.terminations += r.terminated ? 1 : 0;
    a.mean_rmse_roll += r.rmse_roll;
    a.mean_rmse_gamma += r.rmse_gamma;
    a.mean_rmse_yaw += r.rmse_yaw;
    a.mean_rmse_mach += r.rmse_mach;
    a.mean_abs_roll += r.mean_abs_roll;
    a.mean_abs_gamma += r.mean_abs_gamma;
    a.mean_return += r.episode_return;
    a.mean_steps += static_cast<double>(r.steps);
  }
  const double n = static_cast<double>(reports.size());
  for (double* v : {&a.mean_rmse_roll, &a.mean_rmse_gamma, &a.mean_rmse_yaw, &a.mean_rmse_mach, &a.mean_abs_roll,
                    &a.mean_abs_gamma, &a.mean_return, &a.mean_steps}) {
    *v /= n;
  }
  return a;
}

bool success(const EvalReport& r, double gamma_bound_deg, double roll_bound_deg) {
  return !r.terminated && r.mean_abs_gamma < gamma_bound_deg && r.mean_abs_roll < roll_bound_deg;
}

ConcatReport concat_eval(const std::vector<Segment>& segments, const env::EpisodeConfig& config, std::uint64_t seed) {
  ConcatReport out;
  if (segments.empty()) return out;
  env::EpisodeConfig first = config;
  first.maneuver = segments[0].maneuver;
  first.reward = segments[0].reward;
  env::Environment environment(first, false);
  env::ResetOverrides overrides;
  overrides.tau = segments[0].tau;
  const std::uint64_t s = sac::episode_seed(seed, 0);
  env::Observation obs = environment.reset(s, overrides);

  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (k > 0) {
      obs = environment.begin_segment(segments[k].maneuver, segments[k].tau, segments[k].reward);
      const auto m = env::measure(environment.local_state());
      const auto world = environment.world_state();
      const auto target = environment.world_target(0);
      Handoff h;
      h.segment = k;
      h.roll_deg = m.roll_deg;
      h.gamma_deg = m.gamma_deg;
      h.yaw_deg = flightdyn::attitude_deg(world).yaw;
      h.mach = m.mach;
      h.altitude_ft = world.altitude_ft();
      h.roll_error_deg = reward::wrap_angle_error(target.roll_deg, m.roll_deg);
      h.gamma_error_deg = target.gamma_deg - m.gamma_deg;
      out.handoffs.push_back(h);
    }
    EvalReport r = run_episode(segments[k].policy, environment, obs);
    r.episode = k;
    r.seed = s;
    const bool stop = r.terminated;
    out.segments.push_back(std::move(r));
    if (stop) {
      out.failed_segment = k;
      break;
    }
  }
  return out;
}

std::vector<TauRow> tau_sweep(const Policy& policy, const std::vector<double>& taus, const env::EpisodeConfig& config,
                              std::size_t episodes, std::uint64_t seed, bool force) {
  std::vector<TauRow> rows;
  for (double tau : taus) {
    TauRow row;
    row.tau = tau;
    row.feasibility = trajectory::check_feasibility(config.maneuver, tau, config.aircraft);
    row.extrapolated = tau < config.tau_min || tau > config.tau_max;
    row.steps = trajectory::horizon_steps(config.maneuver, config.agent_hz, tau);
    row.skipped = !row.feasibility.feasible && !force;
    if (!row.skipped) {
      EvalOptions opts;
      opts.tau = tau;
      row.summary = aggregate(evaluate(policy, config, episodes, seed, opts));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "t_s,target_roll_deg,actual_roll_deg,target_gamma_deg,actual_gamma_deg,target_yaw_deg,actual_yaw_deg,"
         "target_mach,actual_mach,action_aileron,action_elevator,action_rudder,action_throttle\n";
  auto f = [](double v) { return kv::format_double(v); };
  for (const TraceRow& r : trace) {
    out << f(r.t_s) << ',' << f(r.target.roll_deg) << ',' << f(r.actual.roll_deg) << ',' << f(r.target.gamma_deg)
        << ',' << f(r.actual.gamma_deg) << ',' << f(r.target.yaw_deg) << ',' << f(r.actual.yaw_deg) << ','
        << f(r.target.mach) << ',' << f(r.actual.mach);
    for (double a : r.action) out << ',' << f(a);
    out << '\n';
  }
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trace", 0, "header");
  if (kv::split(line, ',').size() != 13) throw ParseError("expected 13 columns", 0, "header");
  std::vector<TraceRow> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (kv::trim(line).empty()) continue;
    const auto cells = kv::split(line, ',');
    if (cells.size() != 13) throw ParseError("expected 13 columns", row, "row");
    std::array<double, 13> v{};
    for (std::size_t i = 0; i < 13; ++i) {
      try {
        v[i] = kv::to_double(cells[i], "trace");
      } catch (const ParseError&) {
        throw ParseError("not a number", row, std::to_string(i));
      }
    }
    TraceRow r;
    r.t_s = v[0];
    r.target = {v[1], v[3], v[5], v[7]};
    r.actual = {v[2], v[4], v[6], v[8]};
    r.action = {v[9], v[10], v[11], v[12]};
    rows.push_back(r);
  }
  return rows;
}

std::vector<std::filesystem::path> export_run(const std::filesystem::path& run_dir) {
  const auto traces = run_dir / "traces";
  std::vector<std::filesystem::path> inputs;
  if (std::filesystem::is_directory(traces)) {
    for (const auto& entry : std::filesystem::directory_iterator(traces)) {
      if (entry.path().extension() == ".csv") inputs.push_back(entry.path());
    }
  }
  if (inputs.empty()) throw Error("run '" + run_dir.string() + "' has no traces");
  std::sort(inputs.begin(), inputs.end());
  std::vector<std::filesystem::path> written;
  for (const auto& p : inputs) {
    std::ifstream in(p);
    if (!in) throw Error("cannot read trace '" + p.string() + "'");
    std::ostringstream out;
    write_trace_csv(out, read_trace_csv(in));
    const auto target = run_dir / "plot" / p.filename();
    checkpoint::atomic_write(target, out.str());
    written.push_back(target);
  }
  return written;
}

void write_meta(const std::filesystem::path& run_dir, const RunMeta& meta) {
  std::ostringstream out;
  out << "amrl_version = " << kVersion << '\n';
  out << "observation_layout = " << env::kObservationLayout << '\n';
  out << "checkpoint_format = " << checkpoint::kFormatVersion << '\n';
  out << "command = " << meta.command << '\n';
  out << "seed = " << meta.seed << '\n';
  if (!meta.maneuver.empty()) out << "maneuver = " << meta.maneuver << '\n';
  out << "workers = " << meta.workers << '\n';
  out << "deterministic = " << (meta.workers <= 1 ? "true" : "false") << '\n';
  for (const auto& [k, v] : meta.extra) out << k << " = " << v << '\n';
  checkpoint::atomic_write(run_dir / "meta.txt", out.str());
}

}  // namespace amrl::harness
