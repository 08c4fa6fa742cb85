#include "amrl/reward.hpp"

#include <algorithm>
#include <cmath>

#include "amrl/error.hpp"

namespace amrl::reward {

namespace {

RewardConfig make(double roll_w, double gamma_w, double yaw_w, double mach_w) {
  RewardConfig c;
  c.components[kRoll] = {Kind::kAsymptotic, 30.0, roll_w};
  c.components[kGamma] = {Kind::kAsymptotic, 15.0, gamma_w};
  c.components[kYaw] = {Kind::kAsymptotic, 30.0, yaw_w};
  c.components[kMach] = {Kind::kAsymptotic, 0.05, mach_w};
  c.components[kAileronRate] = {Kind::kLinear, 2.0, -0.025};
  c.components[kElevatorRate] = {Kind::kLinear, 2.0, -0.025};
  c.components[kRudderRate] = {Kind::kLinear, 2.0, -0.025};
  c.components[kThrottleRate] = {Kind::kLinear, 1.0, -0.025};
  return c;
}

}  // namespace

void RewardConfig::validate() const {
  for (std::size_t i = 0; i < kComponentCount; ++i) {
    const auto& c = components[i];
    const std::string name(kComponentNames[i]);
    if (!(c.scaling > 0.0) || !std::isfinite(c.scaling)) throw DomainError("reward scaling for " + name + " must be > 0");
    if (!std::isfinite(c.weight)) throw DomainError("reward weight for " + name + " must be finite");
    if (i < kAileronRate) {
      if (c.kind != Kind::kAsymptotic || !(c.weight > 0.0)) {
        throw DomainError("tracking component " + name + " must be asymptotic with positive weight");
      }
    } else if (c.kind != Kind::kLinear || !(c.weight < 0.0)) {
      throw DomainError("command component " + name + " must be linear with negative weight");
    }
  }
}

double RewardConfig::abs_weight_sum() const {
  double s = 0.0;
  for (const auto& c : components) s += std::abs(c.weight);
  return s;
}

RewardConfig preset(std::string_view maneuver) {
  if (maneuver == "barrel_roll") return make(0.35, 0.20, 0.25, 0.10);
  if (maneuver == "immelmann") return make(0.30, 0.30, 0.20, 0.10);
  return make(0.25, 0.35, 0.20, 0.10);
}

double wrap_angle_error(double target_deg, double actual_deg) {
  const double d = target_deg - actual_deg;
  return std::isfinite(d) ? wrap_180(d) : d;
}

double asymptotic_component(double raw_error, double scaling) {
  const double e = std::abs(raw_error) / scaling;
  if (std::isinf(e)) return 0.0;
  return 1.0 - e / (1.0 + e);
}

double linear_component(double command_delta, double max_delta) {
  return std::min(std::abs(command_delta) / max_delta, 1.0);
}

TrackingErrors tracking_errors(const trajectory::TargetPoint& target, const Measured& measured) {
  const double attenuation = std::cos(target.gamma_deg * kDegToRad);
  return {wrap_angle_error(target.roll_deg, measured.roll_deg) * attenuation,
          target.gamma_deg - measured.gamma_deg,
          wrap_angle_error(target.yaw_deg, measured.yaw_deg) * attenuation, target.mach - measured.mach};
}

RewardBreakdown compute_reward(const trajectory::TargetPoint& target, const Measured& measured,
                               const flightdyn::ControlInputs& action, const flightdyn::ControlInputs& prev_action,
                               const RewardConfig& config) {
  RewardBreakdown b;
  const TrackingErrors err = tracking_errors(target, measured);
  b.raw_error = {err.roll,
                 err.gamma,
                 err.yaw,
                 err.mach,
                 action.aileron_cmd - prev_action.aileron_cmd,
                 action.elevator_cmd - prev_action.elevator_cmd,
                 action.rudder_cmd - prev_action.rudder_cmd,
                 action.throttle_cmd - prev_action.throttle_cmd};
  const double norm = config.abs_weight_sum();
  double weighted = 0.0;
  for (std::size_t i = 0; i < kComponentCount; ++i) {
    const auto& spec = config.components[i];
    b.normalized[i] = spec.kind == Kind::kAsymptotic ? asymptotic_component(b.raw_error[i], spec.scaling)
                                                     : linear_component(b.raw_error[i], spec.scaling);
    b.contribution[i] = spec.weight * b.normalized[i];
    weighted += b.contribution[i];
  }
  b.total = weighted / norm;
  return b;
}

}  // namespace amrl::reward
