#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "amrl/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = amrl::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("amrl_test_cli_" + name);
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

std::size_t data_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  std::getline(in, line);
  while (std::getline(in, line)) n += line.empty() ? 0 : 1;
  return n;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  const Result none = run({});
  CHECK(none.code == 1);
  CHECK(none.out.find("gen-traj") != std::string::npos);
  CHECK(run({"gen-traj", "--bogus"}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"eval"}).code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("gen-traj and feasibility") {
  const fs::path dir = scratch_dir("traj");
  const std::string csv = (dir / "loop.csv").string();
  REQUIRE(run({"gen-traj", "--maneuver", "loop", "--duration", "40", "--out", csv}).code == 0);
  CHECK(data_rows(csv) == 401);
  CHECK(slurp(csv).rfind("t_s,roll_deg,gamma_deg,yaw_deg,mach\n", 0) == 0);

  const Result bad = run({"feasibility", "--traj", csv, "--tau", "0.375"});
  CHECK(bad.code == 0);
  CHECK(bad.out.find("infeasible") != std::string::npos);
  const Result good = run({"feasibility", "--traj", csv, "--tau", "1"});
  CHECK(good.code == 0);
  CHECK(good.out.rfind("feasible", 0) == 0);

  CHECK(run({"feasibility", "--traj", (dir / "missing.csv").string()}).code == 2);
  CHECK(run({"gen-traj", "--maneuver", "loop", "--mach", "0.15", "--out", csv}).code == 2);
}

TEST_CASE("train, eval and export reproduce a run directory") {
  const fs::path dir = scratch_dir("run");
  const fs::path cfg = dir / "tiny.cfg";
  {
    std::ofstream out(cfg);
    out << "env.maneuver = level\ntraj.duration_s = 3\ntrain.steps = 400\neval.episodes = 2\n"
           "sac.hidden = 16x16\nsac.batch = 32\nsac.warmup = 100\nsac.seed = 5\n";
  }
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  REQUIRE(run({"train", "--config", cfg.string(), "--out", a}).code == 0);
  REQUIRE(run({"train", "--config", cfg.string(), "--out", b}).code == 0);
  for (const char* f : {"config.snapshot", "metrics.jsonl", "checkpoint.amrl", "meta.txt", "reports.jsonl",
                        "traces/ep0.csv", "traces/ep1.csv"}) {
    CHECK(fs::exists(fs::path(a) / f));
  }
  CHECK(slurp(fs::path(a) / "metrics.jsonl") == slurp(fs::path(b) / "metrics.jsonl"));
  CHECK(slurp(fs::path(a) / "checkpoint.amrl") == slurp(fs::path(b) / "checkpoint.amrl"));
  CHECK(slurp(fs::path(a) / "meta.txt").find("observation_layout = OBS-26-v1") != std::string::npos);

  const std::string e = (dir / "e").string();
  REQUIRE(run({"eval", "--checkpoint", a, "--out", e}).code == 0);
  CHECK(slurp(fs::path(e) / "reports.jsonl") == slurp(fs::path(a) / "reports.jsonl"));
  CHECK(slurp(fs::path(e) / "traces" / "ep1.csv") == slurp(fs::path(a) / "traces" / "ep1.csv"));

  REQUIRE(run({"export", "--run", a}).code == 0);
  CHECK(data_rows(fs::path(a) / "plot" / "ep0.csv") == 30);

  const std::string s = (dir / "s").string();
  const Result sweep = run({"sweep-tau", "--checkpoint", a, "--taus", "1,2", "--episodes", "1", "--out", s});
  CHECK(sweep.code == 0);
  CHECK(data_rows(fs::path(s) / "sweep.csv") == 2);

  const Result concat = run({"concat-eval", "--checkpoint", a, "--checkpoint", a});
  CHECK(concat.code == 0);

  CHECK(run({"eval", "--checkpoint", (dir / "nothing").string()}).code == 2);
}
