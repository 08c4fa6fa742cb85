#include "amrl/environment.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "amrl/error.hpp"

namespace amrl::env {

namespace {

double minmax(double v, double lo, double hi) { return std::clamp((v - lo) / (hi - lo), 0.0, 1.0); }

double symmetric(double v, double half_range) { return minmax(v, -half_range, half_range); }

Quat heading_rotation(double yaw_deg) { return quat_from_euler({0.0, 0.0, yaw_deg * kDegToRad}); }

}  // namespace

std::string_view to_string(TerminationMode m) { return m == TerminationMode::kTimeOnly ? "time_only" : "divergence"; }
std::string_view to_string(DivergenceAxis a) { return a == DivergenceAxis::kLongitudinal ? "longitudinal" : "lateral"; }

TerminationMode termination_mode_from(std::string_view s) {
  if (s == "time_only") return TerminationMode::kTimeOnly;
  if (s == "divergence") return TerminationMode::kDivergence;
  throw DomainError("unknown termination mode '" + std::string(s) + "'");
}

DivergenceAxis divergence_axis_from(std::string_view s) {
  if (s == "longitudinal") return DivergenceAxis::kLongitudinal;
  if (s == "lateral") return DivergenceAxis::kLateral;
  throw DomainError("unknown divergence axis '" + std::string(s) + "'");
}

std::size_t EpisodeConfig::substeps() const {
  const double n = 1.0 / (agent_hz * sim_dt_s);
  return static_cast<std::size_t>(std::llround(n));
}

void EpisodeConfig::validate(bool require_feasible) const {
  if (!(agent_hz > 0.0) || !(sim_dt_s > 0.0 && sim_dt_s <= 0.05)) {
    throw DomainError("agent_hz must be positive and sim_dt_s in (0, 0.05]");
  }
  const double n = 1.0 / (agent_hz * sim_dt_s);
  if (n < 1.0 - 1e-9 || std::abs(n - std::round(n)) > 1e-9) {
    throw DomainError("agent period must be a whole number of simulator steps");
  }
  if (!(tau_min > 0.0) || !(tau_max >= tau_min)) throw DomainError("tau range must satisfy 0 < tau_min <= tau_max");
  if (initial_altitudes_ft.empty()) throw DomainError("initial_altitudes_ft must not be empty");
  for (double h : initial_altitudes_ft) {
    if (!(h >= 0.0 && h <= flightdyn::kMaxAltitudeFt)) throw DomainError("initial altitude out of range");
  }
  reward.validate();
  aircraft.validate();
  if (require_feasible) {
    const auto report = trajectory::check_feasibility(maneuver, tau_min, aircraft);
    if (!report.feasible) {
      throw DomainError("maneuver '" + maneuver.kind() + "' infeasible at tau " + std::to_string(tau_min));
    }
  }
}

flightdyn::ControlInputs denormalize_action(const Action& a) {
  return {a[0], a[1], a[2], 0.5 * (a[3] + 1.0)};
}

Action normalize_controls(const flightdyn::ControlInputs& c) {
  return {c.aileron_cmd, c.elevator_cmd, c.rudder_cmd, 2.0 * c.throttle_cmd - 1.0};
}

bool check_termination(double roll_error, double gamma_error, double yaw_error, TerminationMode mode,
                       DivergenceAxis axis) {
  if (mode == TerminationMode::kTimeOnly) return false;
  if (axis == DivergenceAxis::kLongitudinal) return std::abs(gamma_error) > kGammaDivergenceDeg;
  return std::abs(roll_error) > kLateralDivergenceDeg && std::abs(yaw_error) > kLateralDivergenceDeg;
}

reward::Measured measure(const flightdyn::AircraftState& state) {
  const auto att = flightdyn::attitude_deg(state);
  return {att.roll, flightdyn::flight_path_angle(state), att.yaw, flightdyn::mach_of(state)};
}

Observation build_observation(const flightdyn::AircraftState& state, const trajectory::TargetPoint& target,
                              const Action& prev_action, double remaining_fraction, double tau,
                              const ObservationContext& context) {
  using R = ObservationRanges;
  const reward::Measured m = measure(state);
  const reward::TrackingErrors err = reward::tracking_errors(target, m);
  Observation o{};
  o[0] = symmetric(err.roll, R::kAngleError);
  o[1] = symmetric(err.gamma, R::kAngleError);
  o[2] = symmetric(err.yaw, R::kAngleError);
  o[3] = symmetric(err.mach, R::kMachError);
  o[4] = minmax(state.altitude_ft(), 0.0, R::kAltitudeMaxFt);
  o[5] = minmax(state.true_airspeed(), 0.0, R::kAirspeedMax);
  o[6] = minmax(state.velocity_body.x, 0.0, R::kAirspeedMax);
  o[7] = symmetric(state.velocity_body.y, R::kLateralVelocity);
  o[8] = symmetric(state.velocity_body.z, R::kLateralVelocity);
  o[9] = symmetric(std::sin(m.roll_deg * kDegToRad), 1.0);
  o[10] = symmetric(std::cos(m.roll_deg * kDegToRad), 1.0);
  o[11] = symmetric(std::sin(m.gamma_deg * kDegToRad), 1.0);
  o[12] = symmetric(std::cos(m.gamma_deg * kDegToRad), 1.0);
  o[13] = symmetric(state.body_rates.x * kRadToDeg, R::kRateDps);
  o[14] = symmetric(state.body_rates.y * kRadToDeg, R::kRateDps);
  o[15] = symmetric(state.body_rates.z * kRadToDeg, R::kRateDps);
  for (std::size_t i = 0; i < kActionSize; ++i) o[16 + i] = symmetric(prev_action[i], 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    o[20 + i] = symmetric(state.deflections[i], context.max_deflection_deg[i] * kDegToRad);
  }
  o[23] = minmax(state.throttle, 0.0, 1.0);
  o[24] = std::clamp(remaining_fraction, 0.0, 1.0);
  o[25] = context.tau_max > context.tau_min ? minmax(tau, context.tau_min, context.tau_max) : 0.5;
  return o;
}

Environment::Environment(EpisodeConfig config, bool require_feasible)
    : config_(std::move(config)),
      local_traj_(trajectory::rebase_yaw(config_.maneuver, 0.0)),
      world_traj_(config_.maneuver),
      reward_(config_.reward) {
  config_.validate(require_feasible);
}

Observation Environment::reset(std::uint64_t seed, const ResetOverrides& overrides) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double yaw_draw = 360.0 * unit(rng);
  const std::size_t alt_index = std::min(
      config_.initial_altitudes_ft.size() - 1,
      static_cast<std::size_t>(unit(rng) * static_cast<double>(config_.initial_altitudes_ft.size())));
  const double tau_draw = config_.tau_min + (config_.tau_max - config_.tau_min) * unit(rng);

  draw_.initial_yaw_deg = wrap_360(overrides.yaw_deg.value_or(
      config_.randomize_yaw ? yaw_draw : config_.maneuver[0].yaw_deg));
  draw_.altitude_ft = overrides.altitude_ft.value_or(config_.initial_altitudes_ft[alt_index]);
  draw_.tau = overrides.tau.value_or(tau_draw);

  reward_ = config_.reward;
  local_traj_ = trajectory::rebase_yaw(config_.maneuver, 0.0);
  world_traj_ = trajectory::rebase_yaw(config_.maneuver, draw_.initial_yaw_deg);
  draw_.horizon = trajectory::horizon_steps(local_traj_, config_.agent_hz, draw_.tau);

  const auto trim = flightdyn::trim_state(draw_.altitude_ft, local_traj_[0].mach, 0.0, config_.aircraft);
  state_ = trim.state;
  prev_controls_ = trim.controls;
  prev_action_ = normalize_controls(trim.controls);
  step_ = 0;
  active_ = true;
  obs_ = observe();
  return obs_;
}

Observation Environment::begin_segment(const trajectory::ManeuverTrajectory& maneuver, double tau,
                                       const reward::RewardConfig& reward) {
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  const double local_yaw = flightdyn::attitude_deg(state_).yaw;
  local_traj_ = trajectory::rebase_yaw(maneuver, local_yaw);
  world_traj_ = trajectory::rebase_yaw(maneuver, wrap_360(local_yaw + draw_.initial_yaw_deg));
  reward_ = reward;
  draw_.tau = tau;
  draw_.horizon = trajectory::horizon_steps(local_traj_, config_.agent_hz, tau);
  step_ = 0;
  active_ = true;
  obs_ = observe();
  return obs_;
}

trajectory::TargetPoint Environment::local_target(std::size_t step) const {
  return trajectory::sample_target(local_traj_, step, config_.agent_hz, draw_.tau).target;
}

trajectory::TargetPoint Environment::world_target(std::size_t step) const {
  return trajectory::sample_target(world_traj_, step, config_.agent_hz, draw_.tau).target;
}

flightdyn::AircraftState Environment::world_state() const {
  flightdyn::AircraftState w = state_;
  const Quat heading = heading_rotation(draw_.initial_yaw_deg);
  w.position_ned = rotate(heading, state_.position_ned);
  w.attitude_quat = normalized(hamilton(heading, state_.attitude_quat));
  return w;
}

Observation Environment::observe() const {
  // Errors are taken against the target the next action is rewarded on.
  const std::size_t next = std::min(step_ + 1, draw_.horizon);
  const double remaining = 1.0 - static_cast<double>(step_) / static_cast<double>(draw_.horizon);
  ObservationContext ctx{config_.tau_min, config_.tau_max, config_.aircraft.max_deflection_deg};
  return build_observation(state_, local_target(next), prev_action_, remaining, draw_.tau, ctx);
}

StepResult Environment::step(const Action& raw_action) {
  if (!active_) throw Error("step() called on an inactive episode; call reset()");
  Action action = raw_action;
  for (double& a : action) {
    if (!(a >= -1.0 && a <= 1.0)) {
      if (!warned_clamp_) {
        std::cerr << "warning: action component " << a << " outside [-1, 1], clamping\n";
        warned_clamp_ = true;
      }
      a = std::isnan(a) ? 0.0 : std::clamp(a, -1.0, 1.0);
    }
  }
  const flightdyn::ControlInputs controls = denormalize_action(action);

  StepResult result;
  StepInfo& info = result.info;
  info.controls = controls;
  try {
    const std::size_t n = config_.substeps();
    for (std::size_t i = 0; i < n; ++i) state_ = flightdyn::step(state_, controls, config_.sim_dt_s, config_.aircraft);
    info.measured = measure(state_);
  } catch (const Error& e) {
    info.fault = true;
    info.fault_message = e.what();
  }
  ++step_;
  info.step = step_;
  info.state = world_state();
  info.target = world_target(step_);

  const auto sample = trajectory::sample_target(local_traj_, step_, config_.agent_hz, draw_.tau);
  if (info.fault) {
    result.terminated = true;
    result.reward = 0.0;
    active_ = false;
    result.observation = obs_;
    return result;
  }

  info.breakdown = reward::compute_reward(sample.target, info.measured, controls, prev_controls_, reward_);
  result.reward = info.breakdown.total;
  const auto err = reward::tracking_errors(sample.target, info.measured);
  result.terminated =
      check_termination(err.roll, err.gamma, err.yaw, config_.termination_mode, config_.divergence_axis);
  result.truncated = sample.done && !result.terminated;
  if (result.terminated || result.truncated) active_ = false;

  info.measured.yaw_deg = wrap_360(info.measured.yaw_deg + draw_.initial_yaw_deg);
  prev_controls_ = controls;
  prev_action_ = action;
  obs_ = observe();
  result.observation = obs_;
  return result;
}

}  // namespace amrl::env
