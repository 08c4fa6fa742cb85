#pragma once

#include <array>
#include <string>
#include <string_view>

#include "amrl/flightdyn.hpp"
#include "amrl/trajectory.hpp"

namespace amrl::reward {

/// Four tracking components followed by four command-rate components.
enum Component : std::size_t {
  kRoll = 0,
  kGamma,
  kYaw,
  kMach,
  kAileronRate,
  kElevatorRate,
  kRudderRate,
  kThrottleRate,
  kComponentCount
};

inline constexpr std::array<std::string_view, kComponentCount> kComponentNames{
    "roll", "gamma", "yaw", "mach", "d_aileron", "d_elevator", "d_rudder", "d_throttle"};

enum class Kind { kAsymptotic, kLinear };

struct ErrorComponentSpec {
  Kind kind = Kind::kAsymptotic;
  double scaling = 1.0;
  double weight = 0.0;
};

struct RewardConfig {
  std::array<ErrorComponentSpec, kComponentCount> components{};

  /// Throws DomainError when a component breaks its sign/kind rules.
  void validate() const;
  double abs_weight_sum() const;
  bool operator==(const RewardConfig&) const = default;
};

/// Preset for "loop", "immelmann", "barrel_roll"; anything else ("level")
/// gets the loop weights.
RewardConfig preset(std::string_view maneuver);

struct Measured {
  double roll_deg;
  double gamma_deg;
  double yaw_deg;
  double mach;

  bool operator==(const Measured&) const = default;
};

struct RewardBreakdown {
  std::array<double, kComponentCount> raw_error{};
  std::array<double, kComponentCount> normalized{};
  std::array<double, kComponentCount> contribution{};
  double total = 0.0;
};

/// Signed target - actual wrapped into (-180, 180].
double wrap_angle_error(double target_deg, double actual_deg);

/// 1 / (1 + |e| / s).
double asymptotic_component(double raw_error, double scaling);

/// min(|delta| / max_delta, 1).
double linear_component(double command_delta, double max_delta);

/// Roll/yaw errors are scaled by cos(target gamma) before normalization
/// so the Euler flip through the vertical carries no penalty.
RewardBreakdown compute_reward(const trajectory::TargetPoint& target, const Measured& measured,
                               const flightdyn::ControlInputs& action,
                               const flightdyn::ControlInputs& prev_action, const RewardConfig& config);

/// The attenuated roll/yaw and plain gamma tracking errors compute_reward uses.
struct TrackingErrors {
  double roll;
  double gamma;
  double yaw;
  double mach;
};
TrackingErrors tracking_errors(const trajectory::TargetPoint& target, const Measured& measured);

}  // namespace amrl::reward
