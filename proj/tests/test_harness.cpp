#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"

#include "amrl/checkpoint.hpp"
#include "amrl/error.hpp"
#include "amrl/harness.hpp"
#include "amrl/runconfig.hpp"

using namespace amrl;
using namespace amrl::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("amrl_test_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

env::EpisodeConfig loop_config() {
  env::EpisodeConfig c;
  c.maneuver = trajectory::generate_loop(40.0, 0.0, 0.6, 0.1, 0.1);
  c.termination_mode = env::TerminationMode::kDivergence;
  return c;
}

Policy constant_policy(env::Action a) {
  return [a](const env::Observation&, const env::Environment&) { return a; };
}

sac::SacAgent random_agent(std::uint64_t seed) {
  sac::SacConfig c;
  c.hidden = {16, 16};
  c.seed = seed;
  sac::SacAgent a = sac::SacAgent::create(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  for (double& v : a.policy.params()) v += n(rng);
  return a;
}

TraceRow row(double t, double roll, double actual_roll) {
  TraceRow r;
  r.t_s = t;
  r.target = {roll, 5.0, 350.0, 0.6};
  r.actual = {actual_roll, 5.0, 350.0, 0.6};
  return r;
}

}  // namespace

TEST_CASE("RMSE uses wrapped angle differences") {
  EvalReport r;
  for (int i = 0; i < 10; ++i) {
    TraceRow t = row(i * 0.1, 170.0, 170.0);
    t.actual.yaw_deg = t.target.yaw_deg + 360.0;
    t.actual.roll_deg = t.target.roll_deg - 360.0;
    r.trace.push_back(t);
  }
  summarize(r);
  CHECK(r.rmse_roll == 0.0);
  CHECK(r.rmse_yaw == 0.0);
  CHECK(r.rmse_gamma == 0.0);

  EvalReport w;
  w.trace.push_back(row(0.0, 179.0, -179.0));
  summarize(w);
  CHECK(w.rmse_roll == doctest::Approx(2.0));
  CHECK(w.max_abs_roll == doctest::Approx(2.0));
}

TEST_CASE("a perfect-tracking oracle has zero error and exports equal columns") {
  // The oracle reports the step target as its own measurement.
  EvalReport r;
  r.trace.resize(0);
  env::Environment e(loop_config());
  e.reset(1);
  for (std::size_t k = 1; k <= e.draw().horizon; ++k) {
    const auto t = e.world_target(k);
    r.trace.push_back({static_cast<double>(k) / 10.0, t, {t.roll_deg, t.gamma_deg, t.yaw_deg, t.mach}, {}});
  }
  summarize(r);
  CHECK(r.rmse_roll == 0.0);
  CHECK(r.rmse_gamma == 0.0);
  CHECK(r.rmse_yaw == 0.0);
  CHECK(r.rmse_mach == 0.0);

  const fs::path dir = scratch_dir("perfect");
  fs::create_directories(dir / "traces");
  {
    std::ofstream out(dir / "traces" / "ep0.csv");
    write_trace_csv(out, r.trace);
  }
  const auto written = export_run(dir);
  REQUIRE(written.size() == 1);
  const std::string first = slurp(written[0]);
  std::istringstream in(first);
  std::string line;
  std::getline(in, line);
  CHECK(std::count(line.begin(), line.end(), ',') == 12);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() == 13);
    for (std::size_t c = 1; c < 9; c += 2) CHECK(cells[c] == cells[c + 1]);
  }
  CHECK(rows == r.trace.size());
  export_run(dir);
  CHECK(slurp(written[0]) == first);

  CHECK_THROWS_AS(export_run(scratch_dir("empty")), Error);
}

TEST_CASE("evaluation is reproducible and traces match episode length") {
  const Policy p = constant_policy({0.0, 0.05, 0.0, 0.3});
  const auto a = evaluate(p, loop_config(), 3, 5);
  const auto b = evaluate(p, loop_config(), 3, 5);
  CHECK(a == b);
  for (const auto& r : a) {
    CHECK(r.trace.size() == r.steps);
    CHECK(r.rmse_gamma >= 0.0);
  }
}

TEST_CASE("concatenation degenerate cases") {
  const Policy p = constant_policy({0.0, 0.0, 0.0, 0.5});
  const env::EpisodeConfig cfg = loop_config();
  CHECK(concat_eval({}, cfg, 3).segments.empty());

  Segment s{p, cfg.maneuver, cfg.reward, 1.0};
  const ConcatReport one = concat_eval({s}, cfg, 3);
  const auto direct = evaluate(p, cfg, 1, 3);
  REQUIRE(one.segments.size() == 1);
  CHECK(one.segments[0] == direct[0]);
  CHECK(one.handoffs.empty());
}

TEST_CASE("concatenation reports the failing segment") {
  const env::EpisodeConfig cfg = loop_config();
  const Policy dive = constant_policy({0.0, -1.0, 0.0, 1.0});
  Segment s{dive, cfg.maneuver, cfg.reward, 1.0};
  const ConcatReport r = concat_eval({s, s}, cfg, 3);
  REQUIRE(r.failed_segment.has_value());
  CHECK(*r.failed_segment == 0);
  CHECK(r.segments.size() == 1);
}

TEST_CASE("tau sweep rows") {
  const Policy p = constant_policy({0.0, 0.0, 0.0, 0.5});
  env::EpisodeConfig cfg = loop_config();
  cfg.termination_mode = env::TerminationMode::kTimeOnly;
  const auto rows = tau_sweep(p, {1.0}, cfg, 2, 4);
  REQUIRE(rows.size() == 1);
  const Aggregate direct = aggregate(evaluate(p, cfg, 2, 4));
  CHECK(rows[0].summary.mean_rmse_gamma == direct.mean_rmse_gamma);
  CHECK(rows[0].summary.mean_return == direct.mean_return);
  CHECK_FALSE(rows[0].skipped);

  const auto more = tau_sweep(p, {0.375, 1.5}, cfg, 1, 4);
  CHECK(more[0].skipped);
  CHECK_FALSE(more[0].feasibility.feasible);
  CHECK(more[0].summary.episodes == 0);
  CHECK(more[1].extrapolated);
  CHECK(more[1].steps == 600);
  CHECK(more[1].summary.mean_steps == 600.0);
  CHECK(rows[0].steps == 400);

  const auto forced = tau_sweep(p, {0.375}, cfg, 1, 4, true);
  CHECK_FALSE(forced[0].skipped);
  CHECK(forced[0].summary.episodes == 1);
}

TEST_CASE("checkpoint round trip preserves behaviour bit for bit") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    checkpoint::Checkpoint c;
    c.maneuver = "loop";
    c.run = runconfig::RunConfig{};
    runconfig::apply(c.run, "env.maneuver", "loop");
    c.run.resolve();
    c.agent = random_agent(seed);
    c.run.sac = c.agent.config;
    c.train_seed = seed;
    c.steps_done = 1234;
    c.metrics_cursor = 7;
    std::mt19937_64 warm(seed);
    std::uniform_int_distribution<int> skip(0, 100);
    c.agent.rng.discard(static_cast<unsigned long long>(skip(warm)));

    std::stringstream buf;
    checkpoint::write(buf, c);
    const checkpoint::Checkpoint back = checkpoint::read(buf);
    CHECK(back.agent.policy == c.agent.policy);
    CHECK(back.agent.q1_target == c.agent.q1_target);
    CHECK(back.agent.log_alpha == c.agent.log_alpha);
    CHECK(back.agent.policy_opt == c.agent.policy_opt);
    CHECK(back.agent.rng == c.agent.rng);
    CHECK(back.agent.config == c.agent.config);
    CHECK(back.steps_done == 1234);
    CHECK(back.metrics_cursor == 7);
    CHECK(back.maneuver == "loop");
    CHECK(back.run.episode.maneuver.points() == c.run.episode.maneuver.points());
    CHECK(back.run.episode.maneuver.dt_s() == c.run.episode.maneuver.dt_s());
    CHECK(back.run.episode.maneuver.kind() == "loop");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::mt19937_64 unused(0);
    for (int k = 0; k < 50; ++k) {
      env::Observation o;
      for (double& v : o) v = u(rng);
      CHECK(sac::select_action(back.agent, o, true, unused).action ==
            sac::select_action(c.agent, o, true, unused).action);
    }
  }
}

TEST_CASE("checkpoint load errors name the field") {
  checkpoint::Checkpoint c;
  c.maneuver = "level";
  c.agent = random_agent(5);
  c.run.sac = c.agent.config;
  std::ostringstream out;
  checkpoint::write(out, c);
  const std::string bytes = out.str();

  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bad_in(bad);
  try {
    checkpoint::read(bad_in);
    FAIL("expected bad magic");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
    CHECK(e.field() == "magic");
  }

  std::istringstream layout_in(bytes);
  try {
    checkpoint::read(layout_in, "OBS-27-v2");
    FAIL("expected a layout mismatch");
  } catch (const CheckpointError& e) {
    CHECK(e.field() == "layout");
    CHECK(std::string(e.what()).find("OBS-26-v1") != std::string::npos);
    CHECK(std::string(e.what()).find("OBS-27-v2") != std::string::npos);
  }

  for (std::size_t cut : {3ul, 20ul, bytes.size() / 2, bytes.size() - 1}) {
    std::istringstream in(bytes.substr(0, cut));
    CHECK_THROWS_AS(checkpoint::read(in), CheckpointError);
  }

  const fs::path dir = scratch_dir("ckpt");
  checkpoint::save(c, dir / "a.amrl");
  CHECK(slurp(dir / "a.amrl") == bytes);
  CHECK_FALSE(fs::exists(dir / "a.amrl.tmp"));
  CHECK(checkpoint::load(dir / "a.amrl").agent.policy == c.agent.policy);
  CHECK_THROWS_AS(checkpoint::load(dir / "missing.amrl"), CheckpointError);
}

TEST_CASE("run configs round trip through text") {
  const fs::path root = AMRL_SOURCE_DIR;
  for (const char* name : {"attitude_hold.cfg", "loop.cfg", "barrel_roll.cfg"}) {
    const runconfig::RunConfig c = runconfig::load(root / "config" / name);
    std::istringstream in(runconfig::to_text(c));
    const runconfig::RunConfig back = runconfig::parse(in);
    CHECK(runconfig::to_text(back) == runconfig::to_text(c));
    CHECK(back.episode.maneuver == c.episode.maneuver);
    CHECK(back.sac == c.sac);
  }
  runconfig::RunConfig c;
  CHECK_THROWS_AS(runconfig::apply(c, "env.bogus", "1"), ConfigError);
  CHECK_THROWS_AS(runconfig::apply(c, "aircraft.wingspan", "1"), ConfigError);
  runconfig::apply(c, "env.maneuver", "loop");
  c.resolve();
  CHECK(c.episode.maneuver.duration_s() == doctest::Approx(40.0));
}
