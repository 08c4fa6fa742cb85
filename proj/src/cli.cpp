#include "amrl/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "amrl/checkpoint.hpp"
#include "amrl/error.hpp"
#include "amrl/harness.hpp"
#include "amrl/kv.hpp"
#include "amrl/runconfig.hpp"

namespace amrl::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string out;
};

std::string command_line(const std::vector<std::string>& args) {
  std::string s = "amrl";
  for (const auto& a : args) s += " " + a;
  return s;
}

runconfig::RunConfig load_config(const Common& c) {
  return c.config.empty() ? runconfig::RunConfig{} : runconfig::load(c.config);
}

nlohmann::ordered_json report_json(const harness::EvalReport& r) {
  nlohmann::ordered_json j;
  j["episode"] = r.episode;
  j["seed"] = r.seed;
  j["steps"] = r.steps;
  j["return"] = r.episode_return;
  j["terminated"] = r.terminated;
  j["fault"] = r.fault;
  j["rmse_roll"] = r.rmse_roll;
  j["rmse_gamma"] = r.rmse_gamma;
  j["rmse_yaw"] = r.rmse_yaw;
  j["rmse_mach"] = r.rmse_mach;
  j["max_abs_roll"] = r.max_abs_roll;
  j["max_abs_gamma"] = r.max_abs_gamma;
  j["max_abs_yaw"] = r.max_abs_yaw;
  j["max_abs_mach"] = r.max_abs_mach;
  j["mean_abs_roll"] = r.mean_abs_roll;
  j["mean_abs_gamma"] = r.mean_abs_gamma;
  return j;
}

/// Writes traces/ep<k>.csv and a reports.jsonl for an evaluation.
void write_reports(const fs::path& dir, const std::vector<harness::EvalReport>& reports,
                   const std::string& name = "reports.jsonl", const std::string& trace_prefix = "ep") {
  std::string lines;
  for (const auto& r : reports) {
    lines += report_json(r).dump() + "\n";
    std::ostringstream csv;
    harness::write_trace_csv(csv, r.trace);
    checkpoint::atomic_write(dir / "traces" / (trace_prefix + std::to_string(r.episode) + ".csv"), csv.str());
  }
  checkpoint::atomic_write(dir / name, lines);
}

void print_summary(std::ostream& out, const harness::Aggregate& a) {
  out << std::fixed << std::setprecision(3) << "episodes " << a.episodes << ", terminations " << a.terminations
      << ", mean |gamma err| " << a.mean_abs_gamma << " deg, mean |roll err| " << a.mean_abs_roll
      << " deg, rmse gamma " << a.mean_rmse_gamma << ", rmse roll " << a.mean_rmse_roll << ", mean return "
      << a.mean_return << '\n'
      << std::defaultfloat;
}

void print_feasibility(std::ostream& out, const trajectory::FeasibilityReport& r) {
  out << (r.feasible ? "feasible" : "infeasible") << ": peak pitch rate " << r.required_peak_pitch_rate_dps
      << " deg/s (limit " << r.limit_pitch_rate_dps << "), peak load factor " << r.required_peak_load_factor_g
      << " g (limit " << r.limit_load_factor_g << ")";
  for (const auto& v : r.violations) out << " [" << v << "]";
  out << '\n';
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  for (const auto& part : kv::split(s, ',')) v.push_back(kv::to_double(part, "list"));
  return v;
}

// ---- subcommands ----

int cmd_gen_traj(const Common&, const runconfig::TrajectorySpec& spec, const std::string& out_path,
                 std::ostream& out) {
  if (out_path.empty()) throw ConfigError("gen-traj needs --out");
  const auto traj = spec.build();
  trajectory::save_csv(out_path, traj);
  out << "wrote " << traj.size() << " rows to " << out_path << '\n';
  return kExitOk;
}

int cmd_feasibility(const Common& common, const std::string& traj_path, const runconfig::TrajectorySpec& spec,
                    double tau, double altitude_ft, std::ostream& out) {
  const runconfig::RunConfig cfg = load_config(common);
  const auto traj = traj_path.empty() ? spec.build() : trajectory::load_pilot_csv(traj_path);
  const auto report = trajectory::check_feasibility(traj, tau, cfg.episode.aircraft, altitude_ft);
  print_feasibility(out, report);
  return kExitOk;
}

int cmd_train(const Common& common, std::optional<std::size_t> steps, const std::vector<std::string>& args,
              std::ostream& out, std::ostream& err) {
  runconfig::RunConfig cfg = load_config(common);
  if (common.seed_set) {
    cfg.sac.seed = common.seed;
    cfg.episode.seed = common.seed;
  }
  if (steps) cfg.train_steps = *steps;
  cfg.episode.validate(true);
  const fs::path dir = common.out.empty() ? fs::path("runs") / cfg.maneuver_label() : fs::path(common.out);
  fs::create_directories(dir);
  checkpoint::atomic_write(dir / "config.snapshot", runconfig::to_text(cfg));
  harness::write_meta(dir, {command_line(args), cfg.sac.seed, cfg.maneuver_label(), 1, {}});

  const fs::path partial = dir / "metrics.jsonl.partial";
  std::ofstream metrics(partial, std::ios::trunc);
  std::size_t emitted = 0;
  sac::TrainCallbacks cb;
  cb.on_episode = [&](const sac::EpisodeMetrics& m) {
    metrics << sac::to_json_line(m) << '\n';
    ++emitted;
    if (m.episode % 100 == 0) {
      err << "step " << m.step << " episode " << m.episode << " return " << m.episode_return << " |gamma| "
          << m.mean_abs_gamma << '\n';
    }
  };
  cb.on_fault = [&](const sac::SacAgent& agent, const TrainingFault&) {
    metrics.flush();
    checkpoint::Checkpoint ck{std::string(env::kObservationLayout), cfg.maneuver_label(), agent, cfg,
                              cfg.sac.seed, 0, emitted};
    checkpoint::save(ck, dir / "checkpoint.partial.amrl");
  };
  sac::TrainResult result = sac::train({}, cfg.sac, cfg.episode, cfg.train_steps, cb);
  metrics.close();
  fs::rename(partial, dir / "metrics.jsonl");

  checkpoint::Checkpoint ck{std::string(env::kObservationLayout), cfg.maneuver_label(), result.agent, cfg,
                            cfg.sac.seed, result.steps, emitted};
  checkpoint::save(ck, dir / "checkpoint.amrl");

  const auto reports = harness::evaluate(harness::agent_policy(result.agent), cfg.episode, cfg.eval_episodes,
                                         cfg.eval_seed);
  write_reports(dir, reports);
  out << "trained " << result.steps << " steps, " << emitted << " episodes -> " << dir.string() << '\n';
  print_summary(out, harness::aggregate(reports));
  return kExitOk;
}

checkpoint::Checkpoint load_ckpt(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "checkpoint.amrl";
  return checkpoint::load(p);
}

int cmd_eval(const Common& common, const std::string& ckpt_path, std::optional<std::size_t> episodes,
             std::optional<double> tau, int workers, const std::vector<std::string>& args, std::ostream& out) {
  const checkpoint::Checkpoint ck = load_ckpt(ckpt_path);
  const std::uint64_t seed = common.seed_set ? common.seed : ck.run.eval_seed;
  const std::size_t n = episodes.value_or(ck.run.eval_episodes);
  harness::EvalOptions opts;
  opts.tau = tau;
  opts.workers = workers;
  const auto reports = harness::evaluate(harness::agent_policy(ck.agent), ck.run.episode, n, seed, opts);
  if (!common.out.empty()) {
    const fs::path dir(common.out);
    fs::create_directories(dir);
    checkpoint::atomic_write(dir / "config.snapshot", runconfig::to_text(ck.run));
    write_reports(dir, reports);
    std::vector<std::pair<std::string, std::string>> extra{{"checkpoint", fs::absolute(ckpt_path).string()},
                                                           {"episodes", std::to_string(n)}};
    if (tau) extra.emplace_back("tau", kv::format_double(*tau));
    harness::write_meta(dir, {command_line(args), seed, ck.maneuver, workers, extra});
  }
  const auto agg = harness::aggregate(reports);
  print_summary(out, agg);
  std::size_t ok = 0;
  for (const auto& r : reports) ok += harness::success(r, ck.run.gamma_bound_deg, ck.run.roll_bound_deg) ? 1 : 0;
  out << "successful episodes " << ok << "/" << reports.size() << '\n';
  return kExitOk;
}

int cmd_sweep(const Common& common, const std::string& ckpt_path, const std::string& taus, bool force,
              std::optional<std::size_t> episodes, const std::vector<std::string>& args, std::ostream& out) {
  const checkpoint::Checkpoint ck = load_ckpt(ckpt_path);
  const std::uint64_t seed = common.seed_set ? common.seed : ck.run.eval_seed;
  const auto rows = harness::tau_sweep(harness::agent_policy(ck.agent), parse_list(taus), ck.run.episode,
                                       episodes.value_or(ck.run.eval_episodes), seed, force);
  std::string table = "tau,feasible,extrapolated,skipped,steps,episodes,terminations,mean_abs_gamma,mean_abs_roll,"
                      "rmse_gamma,rmse_roll,mean_return\n";
  for (const auto& r : rows) {
    table += kv::format_double(r.tau) + "," + (r.feasibility.feasible ? "1" : "0") + "," +
             (r.extrapolated ? "1" : "0") + "," + (r.skipped ? "1" : "0") + "," + std::to_string(r.steps) + "," +
             std::to_string(r.summary.episodes) + "," + std::to_string(r.summary.terminations) + "," +
             kv::format_double(r.summary.mean_abs_gamma) + "," + kv::format_double(r.summary.mean_abs_roll) + "," +
             kv::format_double(r.summary.mean_rmse_gamma) + "," + kv::format_double(r.summary.mean_rmse_roll) +
             "," + kv::format_double(r.summary.mean_return) + "\n";
    out << "tau " << r.tau << ": ";
    if (r.skipped) {
      out << "skipped, ";
      print_feasibility(out, r.feasibility);
    } else {
      out << (r.extrapolated ? "(extrapolated) " : "") << r.steps << " steps, ";
      print_summary(out, r.summary);
    }
  }
  if (!common.out.empty()) {
    checkpoint::atomic_write(fs::path(common.out) / "sweep.csv", table);
    harness::write_meta(common.out, {command_line(args), seed, ck.maneuver, 1, {{"taus", taus}}});
  }
  return kExitOk;
}

int cmd_concat(const Common& common, const std::vector<std::string>& ckpts, double tau,
               const std::vector<std::string>& args, std::ostream& out) {
  std::vector<checkpoint::Checkpoint> loaded;
  for (const auto& p : ckpts) loaded.push_back(load_ckpt(p));
  std::vector<harness::Segment> segments;
  for (const auto& ck : loaded) {
    segments.push_back({harness::agent_policy(ck.agent), ck.run.episode.maneuver, ck.run.episode.reward, tau});
  }
  const env::EpisodeConfig& base = loaded.empty() ? env::EpisodeConfig{} : loaded.front().run.episode;
  const std::uint64_t seed = common.seed_set ? common.seed : (loaded.empty() ? 1 : loaded.front().run.eval_seed);
  const auto report = harness::concat_eval(segments, base, seed);
  for (const auto& h : report.handoffs) {
    out << "handoff to segment " << h.segment << ": roll " << h.roll_deg << ", gamma " << h.gamma_deg << ", yaw "
        << h.yaw_deg << ", mach " << h.mach << ", altitude " << h.altitude_ft << " ft\n";
  }
  for (const auto& r : report.segments) {
    out << "segment " << r.episode << ": " << r.steps << " steps, terminated " << (r.terminated ? "yes" : "no")
        << ", mean |gamma err| " << r.mean_abs_gamma << ", mean |roll err| " << r.mean_abs_roll << '\n';
  }
  if (report.failed_segment) out << "divergence in segment " << *report.failed_segment << '\n';
  if (!common.out.empty()) {
    write_reports(common.out, report.segments, "segments.jsonl", "seg");
    harness::write_meta(common.out, {command_line(args), seed, "concat", 1, {}});
  }
  return kExitOk;
}

int cmd_hparam(const Common& common, const std::string& space_path, std::size_t trials, std::size_t budget,
               std::size_t eval_episodes, const std::vector<std::string>& args, std::ostream& out) {
  const runconfig::RunConfig cfg = load_config(common);
  const auto space = sac::load_search_space(space_path);
  const auto result = sac::hparam_search(space, cfg.sac, cfg.episode, trials, budget, common.seed, eval_episodes);
  std::string table = "rank,trial,score,parameters,failed,values\n";
  std::size_t rank = 0;
  for (const auto& t : result.table) {
    std::string values;
    for (const auto& [k, v] : t.values) values += (values.empty() ? "" : ";") + k + "=" + v;
    table += std::to_string(rank++) + "," + std::to_string(t.index) + "," + kv::format_double(t.score) + "," +
             std::to_string(t.parameter_count) + "," + (t.failed ? "1" : "0") + "," + values + "\n";
  }
  out << table;
  if (!common.out.empty()) {
    const fs::path dir(common.out);
    checkpoint::atomic_write(dir / "trials.csv", table);
    runconfig::RunConfig best = cfg;
    best.sac = result.best;
    checkpoint::atomic_write(dir / "best.config", runconfig::to_text(best));
    harness::write_meta(dir, {command_line(args), common.seed, cfg.maneuver_label(), 1,
                              {{"trials", std::to_string(trials)}, {"budget_steps", std::to_string(budget)}}});
  }
  return kExitOk;
}

void add_traj_options(CLI::App* app, runconfig::TrajectorySpec& spec) {
  app->add_option("--maneuver", spec.maneuver, "loop | immelmann | barrel_roll | level");
  app->add_option("--duration", spec.duration_s, "Maneuver duration in seconds");
  app->add_option("--yaw", spec.entry_yaw_deg, "Entry heading in degrees");
  app->add_option("--mach", spec.entry_mach, "Entry Mach number");
  app->add_option("--mach-dip", spec.mach_dip, "Mach loss at the top of vertical maneuvers");
  app->add_option("--roll-fraction", spec.roll_fraction, "Immelmann: fraction spent in the half roll");
  app->add_option("--pitch-amp", spec.pitch_amplitude_deg, "Barrel roll flight path amplitude in degrees");
  app->add_option("--yaw-amp", spec.yaw_amplitude_deg, "Barrel roll heading amplitude in degrees");
  app->add_option("--dt", spec.dt_s, "Sample interval in seconds");
  app->add_option("--noise", spec.noise_deg, "Pilot-style noise amplitude in degrees");
  app->add_option("--noise-seed", spec.noise_seed, "Noise seed");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Aerobatic maneuver training and evaluation"};
  app.name("amrl");
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Run config file");
    sub->add_option("--seed", common.seed, "Seed")->each([&](const std::string&) { common.seed_set = true; });
    sub->add_option("--out", common.out, "Output file or run directory");
  };

  runconfig::TrajectorySpec spec;
  auto* gen = app.add_subcommand("gen-traj", "Write a handcrafted maneuver trajectory as CSV");
  add_common(gen);
  add_traj_options(gen, spec);

  std::optional<std::size_t> steps;
  auto* train = app.add_subcommand("train", "Train an agent and write a run directory");
  add_common(train);
  train->add_option("--steps", steps, "Override train.steps");

  std::string ckpt;
  std::optional<std::size_t> episodes;
  std::optional<double> tau;
  int workers = 1;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with the deterministic policy");
  add_common(eval);
  eval->add_option("--checkpoint", ckpt, "Checkpoint file or run directory")->required();
  eval->add_option("--episodes", episodes, "Episode count");
  eval->add_option("--tau", tau, "Fixed time scaling factor");
  eval->add_option("--workers", workers, "Concurrent episodes (1 keeps runs deterministic)")
      ->check(CLI::PositiveNumber);

  std::string taus = "0.5,1,1.5,2";
  bool force = false;
  auto* sweep = app.add_subcommand("sweep-tau", "Evaluate a checkpoint across time scaling factors");
  add_common(sweep);
  sweep->add_option("--checkpoint", ckpt, "Checkpoint file or run directory")->required();
  sweep->add_option("--taus", taus, "Comma-separated factors");
  sweep->add_option("--episodes", episodes, "Episodes per factor");
  sweep->add_flag("--force", force, "Evaluate infeasible factors too");

  std::vector<std::string> ckpts;
  double concat_tau = 1.0;
  auto* concat = app.add_subcommand("concat-eval", "Fly checkpoints' maneuvers back to back");
  add_common(concat);
  concat->add_option("--checkpoint", ckpts, "Checkpoints in flight order (repeat the flag)")->required();
  concat->add_option("--tau", concat_tau, "Time scaling factor for every segment");

  std::string space;
  std::size_t trials = 10, budget = 20000, eval_eps = 5;
  auto* hp = app.add_subcommand("hparam-search", "Random search over SAC hyper-parameters");
  add_common(hp);
  hp->add_option("--space", space, "Search space file")->required();
  hp->add_option("--trials", trials, "Trial count");
  hp->add_option("--budget", budget, "Training steps per trial");
  hp->add_option("--eval-episodes", eval_eps, "Evaluation episodes per trial");

  std::string traj_path;
  double feas_tau = 1.0;
  double feas_alt = trajectory::kFeasibilityAltitudeFt;
  runconfig::TrajectorySpec feas_spec;
  feas_spec.maneuver = "loop";
  feas_spec.duration_s = 40.0;
  auto* feas = app.add_subcommand("feasibility", "Check a trajectory against the aircraft limits");
  add_common(feas);
  feas->add_option("--traj", traj_path, "Trajectory CSV");
  feas->add_option("--tau", feas_tau, "Time scaling factor");
  feas->add_option("--altitude", feas_alt, "Altitude in feet for the Mach conversion");
  add_traj_options(feas, feas_spec);

  std::string run_dir;
  auto* exp = app.add_subcommand("export", "Write plot-ready CSVs for a run's traces");
  add_common(exp);
  exp->add_option("--run", run_dir, "Run directory")->required();

  if (args.empty()) {
    out << app.help();
    return kExitUsage;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      if (gen->count("--duration") == 0) spec.duration_s = runconfig::default_duration(spec.maneuver);
      return cmd_gen_traj(common, spec, common.out, out);
    }
    if (feas->parsed()) {
      if (feas->count("--duration") == 0) feas_spec.duration_s = runconfig::default_duration(feas_spec.maneuver);
      return cmd_feasibility(common, traj_path, feas_spec, feas_tau, feas_alt, out);
    }
    if (train->parsed()) return cmd_train(common, steps, args, out, err);
    if (eval->parsed()) return cmd_eval(common, ckpt, episodes, tau, workers, args, out);
    if (sweep->parsed()) return cmd_sweep(common, ckpt, taus, force, episodes, args, out);
    if (concat->parsed()) return cmd_concat(common, ckpts, concat_tau, args, out);
    if (hp->parsed()) return cmd_hparam(common, space, trials, budget, eval_eps, args, out);
    if (exp->parsed()) {
      const auto files = harness::export_run(run_dir);
      out << "exported " << files.size() << " traces\n";
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFault;
  }
  out << app.help();
  return kExitUsage;
}

}  // namespace amrl::cli
