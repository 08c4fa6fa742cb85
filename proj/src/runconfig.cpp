#include "amrl/runconfig.hpp"

#include <fstream>
#include <sstream>

#include "amrl/error.hpp"
#include "amrl/kv.hpp"

namespace amrl::runconfig {

namespace {

const char* const kManeuvers[] = {"loop", "immelmann", "barrel_roll", "level"};

bool is_handcrafted(const std::string& m) {
  for (const char* k : kManeuvers) {
    if (m == k) return true;
  }
  return false;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += kv::format_double(v[i]);
  }
  return s;
}

std::size_t to_count(const std::string& value, const std::string& key) {
  const long long v = kv::to_int(value, key);
  if (v < 0) throw ConfigError("'" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

void set_aircraft_field(flightdyn::AircraftParams& p, const std::string& field, const std::string& value) {
  std::ostringstream current;
  flightdyn::write_params(current, p);
  std::istringstream lines(current.str());
  std::string text, line;
  bool found = false;
  while (std::getline(lines, line)) {
    if (kv::trim(line.substr(0, line.find('='))) == field) {
      line = field + " = " + value;
      found = true;
    }
    text += line + '\n';
  }
  if (!found) throw ConfigError("unknown aircraft parameter '" + field + "'");
  std::istringstream in(text);
  try {
    p = flightdyn::parse_params(in);
  } catch (const ParseError& e) {
    throw ConfigError("aircraft." + field + ": " + e.what());
  }
}

void set_reward(reward::RewardConfig& r, const std::string& component, const std::string& attr, const std::string& value,
                const std::string& key) {
  std::size_t idx = reward::kComponentCount;
  for (std::size_t i = 0; i < reward::kComponentCount; ++i) {
    if (reward::kComponentNames[i] == component) idx = i;
  }
  if (idx == reward::kComponentCount) throw ConfigError("unknown reward component in '" + key + "'");
  if (attr == "scaling") {
    r.components[idx].scaling = kv::to_double(value, key);
  } else if (attr == "weight") {
    r.components[idx].weight = kv::to_double(value, key);
  } else {
    throw ConfigError("unknown reward attribute in '" + key + "'");
  }
}

}  // namespace

bool TrajectorySpec::is_file() const { return !is_handcrafted(maneuver); }

trajectory::ManeuverTrajectory TrajectorySpec::build() const {
  using namespace trajectory;
  if (is_file()) {
    ManeuverTrajectory t = load_pilot_csv(maneuver);
    return noise_deg > 0.0 ? add_pilot_noise(t, noise_deg, noise_seed) : t;
  }
  ManeuverTrajectory t = [&] {
    if (maneuver == "loop") return generate_loop(duration_s, entry_yaw_deg, entry_mach, mach_dip, dt_s);
    if (maneuver == "immelmann") {
      return generate_immelmann(duration_s, entry_yaw_deg, entry_mach, mach_dip, roll_fraction, dt_s);
    }
    if (maneuver == "barrel_roll") {
      return generate_barrel_roll(duration_s, entry_yaw_deg, entry_mach, pitch_amplitude_deg, yaw_amplitude_deg,
                                  dt_s);
    }
    return generate_level(duration_s, entry_yaw_deg, entry_mach, dt_s);
  }();
  return noise_deg > 0.0 ? add_pilot_noise(t, noise_deg, noise_seed) : t;
}

double default_duration(const std::string& maneuver) {
  if (maneuver == "loop") return 40.0;
  if (maneuver == "immelmann") return 25.0;
  if (maneuver == "barrel_roll") return 20.0;
  return 10.0;
}

RunConfig::RunConfig() {
  for (const char* m : kManeuvers) rewards[m] = reward::preset(m);
  resolve();
}

std::string RunConfig::maneuver_label() const {
  return traj.is_file() ? std::filesystem::path(traj.maneuver).stem().string() : traj.maneuver;
}

void RunConfig::resolve() {
  episode.maneuver = traj.build();
  const std::string label = maneuver_label();
  auto it = rewards.find(label);
  episode.reward = it != rewards.end() ? it->second : reward::preset(label);
  episode.reward.validate();
}

void apply(RunConfig& c, const std::string& key, const std::string& value, const std::filesystem::path& base_dir) {
  const auto dot = key.find('.');
  if (dot == std::string::npos) throw ConfigError("key '" + key + "' has no section");
  const std::string section = key.substr(0, dot);
  const std::string name = key.substr(dot + 1);
  auto num = [&] { return kv::to_double(value, key); };
  env::EpisodeConfig& e = c.episode;

  try {
    if (section == "env") {
      if (name == "maneuver") {
        const bool had_default_duration = c.traj.duration_s == default_duration(c.traj.maneuver);
        if (is_handcrafted(value)) {
          c.traj.maneuver = value;
        } else {
          std::filesystem::path p(value);
          if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
          c.traj.maneuver = p.lexically_normal().string();
        }
        if (had_default_duration) c.traj.duration_s = default_duration(c.traj.maneuver);
      } else if (name == "agent_hz") {
        e.agent_hz = num();
      } else if (name == "sim_dt_s") {
        e.sim_dt_s = num();
      } else if (name == "termination_mode") {
        e.termination_mode = env::termination_mode_from(value);
      } else if (name == "divergence_axis") {
        e.divergence_axis = env::divergence_axis_from(value);
      } else if (name == "initial_altitudes_ft") {
        e.initial_altitudes_ft.clear();
        for (const auto& part : kv::split(value, ',')) e.initial_altitudes_ft.push_back(kv::to_double(part, key));
      } else if (name == "tau_min") {
        e.tau_min = num();
      } else if (name == "tau_max") {
        e.tau_max = num();
      } else if (name == "randomize_yaw") {
        e.randomize_yaw = kv::to_bool(value, key);
      } else if (name == "seed") {
        e.seed = static_cast<std::uint64_t>(kv::to_int(value, key));
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } else if (section == "traj") {
      if (name == "duration_s") {
        c.traj.duration_s = num();
      } else if (name == "entry_yaw_deg") {
        c.traj.entry_yaw_deg = num();
      } else if (name == "entry_mach") {
        c.traj.entry_mach = num();
      } else if (name == "mach_dip") {
        c.traj.mach_dip = num();
      } else if (name == "roll_fraction") {
        c.traj.roll_fraction = num();
      } else if (name == "pitch_amplitude_deg") {
        c.traj.pitch_amplitude_deg = num();
      } else if (name == "yaw_amplitude_deg") {
        c.traj.yaw_amplitude_deg = num();
      } else if (name == "dt_s") {
        c.traj.dt_s = num();
      } else if (name == "noise_deg") {
        c.traj.noise_deg = num();
      } else if (name == "noise_seed") {
        c.traj.noise_seed = static_cast<std::uint64_t>(kv::to_int(value, key));
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } else if (section == "reward") {
      const auto parts = kv::split(name, '.');
      if (parts.size() != 3) throw ConfigError("reward keys look like reward.<maneuver>.<component>.<attr>");
      auto [it, inserted] = c.rewards.try_emplace(parts[0], reward::preset(parts[0]));
      set_reward(it->second, parts[1], parts[2], value, key);
    } else if (section == "aircraft") {
      if (name == "file") {
        std::filesystem::path p(value);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        e.aircraft = flightdyn::load_params(p);
      } else {
        set_aircraft_field(e.aircraft, name, value);
      }
    } else if (section == "sac") {
      sac::apply_param(c.sac, name, value);
    } else if (key == "train.steps") {
      c.train_steps = to_count(value, key);
    } else if (key == "eval.episodes") {
      c.eval_episodes = to_count(value, key);
    } else if (key == "eval.seed") {
      c.eval_seed = static_cast<std::uint64_t>(kv::to_int(value, key));
    } else if (key == "eval.gamma_bound_deg") {
      c.gamma_bound_deg = num();
    } else if (key == "eval.roll_bound_deg") {
      c.roll_bound_deg = num();
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  } catch (const ParseError& err) {
    throw ConfigError("bad value for '" + key + "': " + err.what());
  }
}

RunConfig parse(std::istream& in, const std::filesystem::path& base_dir) {
  RunConfig c;
  for (const kv::Entry& e : kv::parse(in)) {
    try {
      apply(c, e.key, e.value, base_dir);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    } catch (const DomainError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
  c.resolve();
  c.sac.validate();
  c.episode.validate(false);
  return c;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse(in, path.parent_path());
}

void write(std::ostream& out, const RunConfig& c) {
  const env::EpisodeConfig& e = c.episode;
  auto f = [](double v) { return kv::format_double(v); };
  out << "env.maneuver = " << c.traj.maneuver << '\n';
  out << "env.agent_hz = " << f(e.agent_hz) << '\n';
  out << "env.sim_dt_s = " << f(e.sim_dt_s) << '\n';
  out << "env.termination_mode = " << env::to_string(e.termination_mode) << '\n';
  out << "env.divergence_axis = " << env::to_string(e.divergence_axis) << '\n';
  out << "env.initial_altitudes_ft = " << join_doubles(e.initial_altitudes_ft) << '\n';
  out << "env.tau_min = " << f(e.tau_min) << '\n';
  out << "env.tau_max = " << f(e.tau_max) << '\n';
  out << "env.randomize_yaw = " << (e.randomize_yaw ? "true" : "false") << '\n';
  out << "env.seed = " << e.seed << '\n';

  const TrajectorySpec& t = c.traj;
  out << "traj.duration_s = " << f(t.duration_s) << '\n';
  out << "traj.entry_yaw_deg = " << f(t.entry_yaw_deg) << '\n';
  out << "traj.entry_mach = " << f(t.entry_mach) << '\n';
  out << "traj.mach_dip = " << f(t.mach_dip) << '\n';
  out << "traj.roll_fraction = " << f(t.roll_fraction) << '\n';
  out << "traj.pitch_amplitude_deg = " << f(t.pitch_amplitude_deg) << '\n';
  out << "traj.yaw_amplitude_deg = " << f(t.yaw_amplitude_deg) << '\n';
  out << "traj.dt_s = " << f(t.dt_s) << '\n';
  out << "traj.noise_deg = " << f(t.noise_deg) << '\n';
  out << "traj.noise_seed = " << t.noise_seed << '\n';

  for (const auto& [label, r] : c.rewards) {
    for (std::size_t i = 0; i < reward::kComponentCount; ++i) {
      const std::string prefix = "reward." + label + "." + std::string(reward::kComponentNames[i]);
      out << prefix << ".scaling = " << f(r.components[i].scaling) << '\n';
      out << prefix << ".weight = " << f(r.components[i].weight) << '\n';
    }
  }

  std::ostringstream aircraft;
  flightdyn::write_params(aircraft, e.aircraft);
  std::istringstream lines(aircraft.str());
  for (std::string line; std::getline(lines, line);) out << "aircraft." << line << '\n';

  const sac::SacConfig& s = c.sac;
  out << "sac.discount = " << f(s.discount) << '\n';
  out << "sac.polyak = " << f(s.polyak) << '\n';
  out << "sac.lr_actor = " << f(s.lr_actor) << '\n';
  out << "sac.lr_critic = " << f(s.lr_critic) << '\n';
  out << "sac.lr_alpha = " << f(s.lr_alpha) << '\n';
  out << "sac.batch = " << s.batch << '\n';
  out << "sac.capacity = " << s.capacity << '\n';
  out << "sac.warmup = " << s.warmup << '\n';
  out << "sac.updates_per_step = " << s.updates_per_step << '\n';
  out << "sac.target_entropy = " << f(s.target_entropy) << '\n';
  out << "sac.auto_temperature = " << (s.auto_temperature ? "true" : "false") << '\n';
  out << "sac.init_alpha = " << f(s.init_alpha) << '\n';
  std::string hidden;
  for (std::size_t i = 0; i < s.hidden.size(); ++i) hidden += (i ? "x" : "") + std::to_string(s.hidden[i]);
  out << "sac.hidden = " << hidden << '\n';
  out << "sac.seed = " << s.seed << '\n';

  out << "train.steps = " << c.train_steps << '\n';
  out << "eval.episodes = " << c.eval_episodes << '\n';
  out << "eval.seed = " << c.eval_seed << '\n';
  out << "eval.gamma_bound_deg = " << f(c.gamma_bound_deg) << '\n';
  out << "eval.roll_bound_deg = " << f(c.roll_bound_deg) << '\n';
}

std::string to_text(const RunConfig& c) {
  std::ostringstream out;
  write(out, c);
  return out.str();
}

}  // namespace amrl::runconfig
