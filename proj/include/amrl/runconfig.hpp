#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "amrl/environment.hpp"
#include "amrl/sac.hpp"

namespace amrl::runconfig {

/// Parameters of the handcrafted trajectory generators.
struct TrajectorySpec {
  std::string maneuver = "level";  // loop | immelmann | barrel_roll | level | path to a CSV file
  double duration_s = 10.0;
  double entry_yaw_deg = 0.0;
  double entry_mach = 0.6;
  double mach_dip = 0.1;
  double roll_fraction = 0.3;
  double pitch_amplitude_deg = 10.0;
  double yaw_amplitude_deg = 10.0;
  double dt_s = 0.1;
  double noise_deg = 0.0;
  std::uint64_t noise_seed = 0;

  trajectory::ManeuverTrajectory build() const;
  bool is_file() const;
};

/// Default durations of the handcrafted maneuvers.
double default_duration(const std::string& maneuver);

/// Everything a run needs; parsed from a key = value file.
struct RunConfig {
  TrajectorySpec traj;
  env::EpisodeConfig episode;
  std::map<std::string, reward::RewardConfig> rewards;  // per maneuver label
  sac::SacConfig sac;
  std::size_t train_steps = 50000;
  std::size_t eval_episodes = 10;
  std::uint64_t eval_seed = 1000;
  double gamma_bound_deg = 10.0;
  double roll_bound_deg = 15.0;

  RunConfig();
  /// Rebuilds the maneuver and active reward from traj and rewards.
  void resolve();
  std::string maneuver_label() const;
};

/// Keys: env.*, traj.*, reward.<maneuver>.<component>.{scaling,weight},
/// aircraft.* (or aircraft.file), sac.*, train.steps, eval.*.
/// Relative paths resolve against base_dir.
RunConfig parse(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load(const std::filesystem::path& path);
/// Applies one key; throws ConfigError on an unknown key or bad value.
void apply(RunConfig& config, const std::string& key, const std::string& value,
           const std::filesystem::path& base_dir = {});

/// Fully resolved snapshot; parse(write(c)) reproduces c.
void write(std::ostream& out, const RunConfig& config);
std::string to_text(const RunConfig& config);

}  // namespace amrl::runconfig
