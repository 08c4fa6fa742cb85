#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "amrl/flightdyn.hpp"
#include "amrl/reward.hpp"
#include "amrl/trajectory.hpp"

namespace amrl::env {

inline constexpr std::size_t kObservationSize = 26;
inline constexpr std::size_t kActionSize = 4;
inline constexpr std::string_view kObservationLayout = "OBS-26-v1";

using Observation = std::array<double, kObservationSize>;
using Action = std::array<double, kActionSize>;

enum class TerminationMode { kTimeOnly, kDivergence };
enum class DivergenceAxis { kLongitudinal, kLateral };

std::string_view to_string(TerminationMode m);
std::string_view to_string(DivergenceAxis a);
TerminationMode termination_mode_from(std::string_view s);
DivergenceAxis divergence_axis_from(std::string_view s);

inline constexpr double kGammaDivergenceDeg = 30.0;
inline constexpr double kLateralDivergenceDeg = 60.0;

struct EpisodeConfig {
  trajectory::ManeuverTrajectory maneuver = trajectory::generate_level(10.0, 0.0, 0.6, 0.1);
  double tau_min = 1.0;
  double tau_max = 1.0;
  std::vector<double> initial_altitudes_ft{4000.0};
  bool randomize_yaw = true;
  double agent_hz = 10.0;
  double sim_dt_s = 0.01;
  TerminationMode termination_mode = TerminationMode::kTimeOnly;
  DivergenceAxis divergence_axis = DivergenceAxis::kLongitudinal;
  std::uint64_t seed = 0;
  reward::RewardConfig reward = reward::preset("loop");
  flightdyn::AircraftParams aircraft = flightdyn::genjet();

  std::size_t substeps() const;
  /// Throws DomainError on a broken invariant. The feasibility check at
  /// tau_min can be skipped for forced extrapolation runs.
  void validate(bool require_feasible = true) const;
};

/// Min-max normalization ranges of the observation vector.
struct ObservationRanges {
  static constexpr double kAngleError = 180.0;   // deg, symmetric
  static constexpr double kMachError = 0.5;      // symmetric
  static constexpr double kAltitudeMaxFt = 20000.0;
  static constexpr double kAirspeedMax = 400.0;  // m/s, also u
  static constexpr double kLateralVelocity = 100.0;  // v, w symmetric
  static constexpr double kRateDps = 180.0;      // symmetric
};

/// Policy action in [-1, 1]^4 to simulator inputs: sticks pass through,
/// throttle maps to (a + 1) / 2.
flightdyn::ControlInputs denormalize_action(const Action& a);
Action normalize_controls(const flightdyn::ControlInputs& c);

/// Roll/gamma/yaw errors are wrapped (and attenuated) tracking errors.
bool check_termination(double roll_error, double gamma_error, double yaw_error, TerminationMode mode,
                       DivergenceAxis axis);

struct ObservationContext {
  double tau_min = 1.0;
  double tau_max = 1.0;
  std::array<double, 3> max_deflection_deg{20.0, 25.0, 30.0};
};

Observation build_observation(const flightdyn::AircraftState& state, const trajectory::TargetPoint& target,
                              const Action& prev_action, double remaining_fraction, double tau,
                              const ObservationContext& context);

/// Measured tracking channels of a state: Euler roll/yaw, flight path angle, Mach.
reward::Measured measure(const flightdyn::AircraftState& state);

struct StepInfo {
  reward::RewardBreakdown breakdown;
  reward::Measured measured{};
  trajectory::TargetPoint target;      // in the world frame
  flightdyn::AircraftState state;      // world frame
  flightdyn::ControlInputs controls;
  std::size_t step = 0;
  bool fault = false;
  std::string fault_message;
};

struct StepResult {
  Observation observation{};
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

struct ResetOverrides {
  std::optional<double> yaw_deg;
  std::optional<double> altitude_ft;
  std::optional<double> tau;
};

/// What reset drew.
struct EpisodeDraw {
  double initial_yaw_deg = 0.0;
  double altitude_ft = 0.0;
  double tau = 1.0;
  std::size_t horizon = 0;
};

/**
 * Single-threaded episodic environment.
 *
 * The aircraft is simulated in a heading-local frame whose north axis is
 * the drawn initial heading; world-frame views rotate the local frame about
 * the down axis. Observations and rewards depend only on local quantities,
 * so episodes that differ only in initial heading are identical.
 */
class Environment {
 public:
  explicit Environment(EpisodeConfig config, bool require_feasible = true);

  Observation reset(std::uint64_t seed, const ResetOverrides& overrides = {});
  StepResult step(const Action& action);

  /// Continues from the current aircraft state with a new reference
  /// trajectory, rebased to the aircraft's current heading.
  Observation begin_segment(const trajectory::ManeuverTrajectory& maneuver, double tau,
                            const reward::RewardConfig& reward);

  const EpisodeConfig& config() const { return config_; }
  const EpisodeDraw& draw() const { return draw_; }
  std::size_t step_index() const { return step_; }
  bool active() const { return active_; }
  /// Reference trajectory rebased to the drawn world heading.
  const trajectory::ManeuverTrajectory& world_trajectory() const { return world_traj_; }
  const flightdyn::AircraftState& local_state() const { return state_; }
  flightdyn::AircraftState world_state() const;
  trajectory::TargetPoint world_target(std::size_t step) const;
  const Observation& last_observation() const { return obs_; }

 private:
  Observation observe() const;
  trajectory::TargetPoint local_target(std::size_t step) const;

  EpisodeConfig config_;
  trajectory::ManeuverTrajectory local_traj_;
  trajectory::ManeuverTrajectory world_traj_;
  reward::RewardConfig reward_;
  EpisodeDraw draw_;
  flightdyn::AircraftState state_;
  flightdyn::ControlInputs prev_controls_;
  Action prev_action_{};
  Observation obs_{};
  std::size_t step_ = 0;
  bool active_ = false;
  bool warned_clamp_ = false;
};

}  // namespace amrl::env
