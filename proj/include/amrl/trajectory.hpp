#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "amrl/flightdyn.hpp"

namespace amrl::trajectory {

/// One reference sample: roll in (-180, 180], gamma in [-90, 90],
/// yaw in [0, 360), Mach > 0.
struct TargetPoint {
  double roll_deg = 0.0;
  double gamma_deg = 0.0;
  double yaw_deg = 0.0;
  double mach = 0.0;

  bool valid() const;
  bool operator==(const TargetPoint&) const = default;
};

enum class Source { kHandcrafted, kLoaded };

/// Uniformly sampled 4-channel reference.
class ManeuverTrajectory {
 public:
  /// Throws DomainError when an invariant does not hold.
  ManeuverTrajectory(double dt_s, std::vector<TargetPoint> points, std::string kind, Source source);

  double dt_s() const { return dt_s_; }
  const std::vector<TargetPoint>& points() const { return points_; }
  const TargetPoint& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const { return points_.size(); }
  double duration_s() const { return dt_s_ * static_cast<double>(points_.size() - 1); }
  const std::string& kind() const { return kind_; }
  Source source() const { return source_; }

  bool operator==(const ManeuverTrajectory&) const = default;

 private:
  double dt_s_;
  std::vector<TargetPoint> points_;
  std::string kind_;
  Source source_;
};

ManeuverTrajectory generate_loop(double duration_s, double entry_yaw_deg, double entry_mach,
                                 double mach_dip, double dt_s);

ManeuverTrajectory generate_immelmann(double duration_s, double entry_yaw_deg, double entry_mach,
                                      double mach_dip, double roll_fraction, double dt_s);

ManeuverTrajectory generate_barrel_roll(double duration_s, double entry_yaw_deg, double entry_mach,
                                        double pitch_amplitude_deg, double yaw_amplitude_deg,
                                        double dt_s);

/// Constant wings-level reference, used for attitude-hold tasks.
ManeuverTrajectory generate_level(double duration_s, double yaw_deg, double mach, double dt_s);

/// Adds seeded band-limited noise to roll/gamma/yaw (degrees) and Mach
/// (amplitude * 0.002), emulating a hand-flown recording. Endpoints keep
/// their values; gamma is clamped to [-90, 90].
ManeuverTrajectory add_pilot_noise(const ManeuverTrajectory& traj, double amplitude_deg,
                                   std::uint64_t seed, double cutoff_hz = 0.5);

/// CSV header: t_s,roll_deg,gamma_deg,yaw_deg,mach
void write_csv(std::ostream& out, const ManeuverTrajectory& traj);
void save_csv(const std::filesystem::path& path, const ManeuverTrajectory& traj);
ManeuverTrajectory read_csv(std::istream& in, const std::string& kind = "loaded");
ManeuverTrajectory load_pilot_csv(const std::filesystem::path& path);

ManeuverTrajectory rebase_yaw(const ManeuverTrajectory& traj, double new_initial_yaw_deg);

struct Sample {
  TargetPoint target;
  std::size_t index;          // trajectory index used
  double remaining_fraction;  // 1 at step 0, 0 at the horizon
  bool done;
};

/// Number of agent steps the time-scaled maneuver spans.
std::size_t horizon_steps(const ManeuverTrajectory& traj, double agent_hz, double tau);

Sample sample_target(const ManeuverTrajectory& traj, std::size_t agent_step, double agent_hz, double tau);

struct FeasibilityReport {
  double required_peak_pitch_rate_dps = 0.0;
  double required_peak_load_factor_g = 0.0;
  double limit_pitch_rate_dps = 0.0;
  double limit_load_factor_g = 0.0;
  bool feasible = true;
  std::vector<std::string> violations;
};

/// Reference altitude used to convert the Mach channel into airspeed.
inline constexpr double kFeasibilityAltitudeFt = 4000.0;

FeasibilityReport check_feasibility(const ManeuverTrajectory& traj, double tau,
                                    const flightdyn::AircraftParams& params,
                                    double altitude_ft = kFeasibilityAltitudeFt);

}  // namespace amrl::trajectory
