#include "amrl/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "amrl/error.hpp"
#include "amrl/kv.hpp"

namespace amrl::checkpoint {

namespace {

using netopt::read_u64;
using netopt::write_u64;

void write_string(std::ostream& out, std::string_view s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const char* field) {
  const std::uint64_t n = read_u64(in, field);
  if (n > (1ULL << 30)) throw CheckpointError("implausible length", field);
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw CheckpointError("truncated", field);
  return s;
}

template <typename Fn>
auto guarded(const char* field, Fn&& fn) {
  try {
    return fn();
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(e.what(), field);
  }
}

}  // namespace

void write(std::ostream& out, const Checkpoint& c) {
  out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  write_u64(out, kFormatVersion);
  write_string(out, c.layout);
  write_string(out, c.maneuver);
  runconfig::RunConfig run = c.run;
  run.sac = c.agent.config;
  write_string(out, runconfig::to_text(run));
  std::ostringstream traj;
  trajectory::write_csv(traj, c.run.episode.maneuver);
  write_string(out, c.run.episode.maneuver.kind());
  write_string(out, traj.str());
  write_u64(out, c.train_seed);
  write_u64(out, c.steps_done);
  write_u64(out, c.metrics_cursor);

  const sac::SacAgent& a = c.agent;
  for (const netopt::Mlp* m : {&a.policy, &a.q1, &a.q2, &a.q1_target, &a.q2_target}) netopt::write_mlp(out, *m);
  netopt::write_f64(out, a.log_alpha);
  for (const netopt::AdamState* s : {&a.policy_opt, &a.q1_opt, &a.q2_opt, &a.alpha_opt}) s->write(out);
  std::ostringstream rng;
  rng << a.rng;
  write_string(out, rng.str());
}

Checkpoint read(std::istream& in, std::string_view expected_layout) {
  char magic[5] = {};
  if (!in.read(magic, 5) || std::string_view(magic, 5) != kMagic) throw CheckpointError("bad magic", "magic");
  const std::uint64_t version = read_u64(in, "format_version");
  if (version != kFormatVersion) {
    throw CheckpointError("unsupported format version " + std::to_string(version) + " (expected " +
                              std::to_string(kFormatVersion) + ")",
                          "format_version");
  }
  Checkpoint c;
  c.layout = read_string(in, "layout");
  if (c.layout != expected_layout) {
    throw CheckpointError("observation layout " + c.layout + " does not match environment " +
                              std::string(expected_layout),
                          "layout");
  }
  c.maneuver = read_string(in, "maneuver");
  const std::string run_text = read_string(in, "run_config");
  const std::string traj_kind = read_string(in, "trajectory.kind");
  const std::string traj_csv = read_string(in, "trajectory");
  c.train_seed = read_u64(in, "train_seed");
  c.steps_done = read_u64(in, "steps_done");
  c.metrics_cursor = read_u64(in, "metrics_cursor");

  // The embedded trajectory is authoritative, so the referenced file (if
  // any) need not exist any more.
  auto parse_run = [&](const std::string& text) {
    std::istringstream s(text);
    runconfig::RunConfig r;
    for (const kv::Entry& e : kv::parse(s)) {
      if (e.key == "env.maneuver") {
        r.traj.maneuver = "level";
        continue;
      }
      runconfig::apply(r, e.key, e.value);
    }
    return r;
  };
  c.run = guarded("run_config", [&] { return parse_run(run_text); });
  std::istringstream traj_in(traj_csv);
  c.run.episode.maneuver = guarded("trajectory", [&] { return trajectory::read_csv(traj_in, traj_kind); });
  {
    std::istringstream s(run_text);
    for (const kv::Entry& e : kv::parse(s)) {
      if (e.key == "env.maneuver") c.run.traj.maneuver = e.value;
    }
  }
  auto rit = c.run.rewards.find(c.maneuver);
  c.run.episode.reward = rit != c.run.rewards.end() ? rit->second : reward::preset(c.maneuver);

  sac::SacAgent& a = c.agent;
  a.config = c.run.sac;
  for (netopt::Mlp* m : {&a.policy, &a.q1, &a.q2, &a.q1_target, &a.q2_target}) *m = netopt::read_mlp(in);
  a.log_alpha = netopt::read_f64(in, "log_alpha");
  for (netopt::AdamState* s : {&a.policy_opt, &a.q1_opt, &a.q2_opt, &a.alpha_opt}) *s = netopt::AdamState::read(in);
  std::istringstream rng(read_string(in, "rng"));
  rng >> a.rng;
  if (rng.fail()) throw CheckpointError("unreadable generator state", "rng");

  if (a.policy.input_size() != env::kObservationSize || a.policy.output_size() != 2 * env::kActionSize ||
      a.q1.input_size() != env::kObservationSize + env::kActionSize || a.q1.output_size() != 1) {
    throw CheckpointError("network shapes do not match the observation layout", "networks");
  }
  if (a.policy_opt.first_moment().size() != a.policy.param_count() ||
      a.q1_opt.first_moment().size() != a.q1.param_count() || a.q2_opt.first_moment().size() != a.q2.param_count() ||
      a.alpha_opt.first_moment().size() != 1) {
    throw CheckpointError("optimizer state not congruent with networks", "optimizer");
  }
  return c;
}

void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ostringstream out(std::ios::binary);
  write(out, ckpt);
  atomic_write(path, out.str());
}

Checkpoint load(const std::filesystem::path& path, std::string_view expected_layout) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path.string() + "'", "path");
  return read(in, expected_layout);
}

}  // namespace amrl::checkpoint
