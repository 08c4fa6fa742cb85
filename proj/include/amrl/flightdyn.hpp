#pragma once

/**
 * Reduced-order fixed-wing jet model.
 *
 * Rigid body with quaternion attitude, linear lift/drag/side-force
 * coefficients, first-order actuators and per-axis rate damping.
 * Angular accelerations are control_effectiveness * deflection minus
 * rate_damping * rate; pitch rate is clamped to the aircraft limit.
 * Lift flattens beyond the stall angle and is capped at the load-factor
 * limit. Integration is classical RK4.
 *
 * Sign conventions: body x forward, y right, z down. Positive aileron
 * rolls right, positive elevator pitches nose up, positive rudder yaws
 * right.
 */

#include <array>
#include <filesystem>
#include <iosfwd>

#include "amrl/geometry.hpp"

namespace amrl::flightdyn {

inline constexpr double kGravity = 9.80665;
inline constexpr double kFeetPerMeter = 3.28084;
inline constexpr double kMaxAltitudeFt = 60000.0;

/// Index into per-axis arrays.
enum Axis : std::size_t { kRoll = 0, kPitch = 1, kYaw = 2 };

struct AircraftParams {
  double mass = 4500.0;            // kg
  double wing_area = 18.0;         // m^2
  double max_thrust = 40000.0;     // N
  double cl0 = 0.1;
  double cl_alpha = 4.8;           // per rad
  double cd0 = 0.022;
  double k_induced = 0.09;
  double cy_beta = -0.8;           // per rad
  std::array<double, 3> control_effectiveness{36.0, 4.8, 1.0};  // rad/s^2 per rad
  std::array<double, 3> rate_damping{4.0, 3.0, 2.0};            // 1/s
  double actuator_time_constant_s = 0.05;
  std::array<double, 3> max_deflection_deg{20.0, 25.0, 30.0};   // aileron, elevator, rudder
  double pitch_rate_limit_dps = 30.0;
  double max_load_factor_g = 8.0;
  double alpha_stall_deg = 15.0;

  /// Throws DomainError naming the first field that breaks an invariant.
  void validate() const;
  bool operator==(const AircraftParams&) const = default;
};

/// The bundled "genjet" trainer; values are generic, not a specific type.
AircraftParams genjet();

/// Flat `key = value` file, keys are the field names above. Per-axis
/// fields take three comma-separated values. Unknown keys are rejected.
AircraftParams load_params(const std::filesystem::path& path);
AircraftParams parse_params(std::istream& in);
void write_params(std::ostream& out, const AircraftParams& params);

struct ControlInputs {
  double aileron_cmd = 0.0;   // [-1, 1]
  double elevator_cmd = 0.0;  // [-1, 1]
  double rudder_cmd = 0.0;    // [-1, 1]
  double throttle_cmd = 0.0;  // [0, 1]

  bool in_range() const;
  bool operator==(const ControlInputs&) const = default;
};

struct AircraftState {
  Vec3 position_ned;            // m
  Vec3 velocity_body;           // m/s (u, v, w)
  Quat attitude_quat;           // body -> NED
  Vec3 body_rates;              // rad/s (p, q, r)
  std::array<double, 3> deflections{0.0, 0.0, 0.0};  // rad (aileron, elevator, rudder)
  double throttle = 0.0;        // [0, 1]
  double time_s = 0.0;

  double altitude_ft() const { return -position_ned.z * kFeetPerMeter; }
  double true_airspeed() const { return norm(velocity_body); }
  /// NED velocity.
  Vec3 velocity_ned() const { return rotate(attitude_quat, velocity_body); }
  bool operator==(const AircraftState&) const = default;
};

struct Atmosphere {
  double density;      // kg/m^3
  double sound_speed;  // m/s
  double temperature;  // K
};

/// International Standard Atmosphere, troposphere and lower stratosphere.
/// Throws DomainError outside [0, 60000] ft.
Atmosphere isa_atmosphere(double altitude_ft);

/// Advances one RK4 step. dt must lie in (0, 0.05].
AircraftState step(const AircraftState& state, const ControlInputs& controls, double dt,
                   const AircraftParams& params);

struct Trim {
  AircraftState state;
  ControlInputs controls;
};

/// Wings-level, zero flight-path-angle trim at the requested condition.
/// Throws InfeasibleTrim when no solution lies inside the control limits.
Trim trim_state(double altitude_ft, double mach, double heading_deg, const AircraftParams& params);

/// Flight path angle in degrees; throws UndefinedGamma below 1 m/s.
double flight_path_angle(const AircraftState& state);

double mach_of(const AircraftState& state);

/// Attitude in degrees: roll in (-180, 180], pitch in [-90, 90], yaw in [0, 360).
struct AttitudeDeg {
  double roll;
  double pitch;
  double yaw;
};
AttitudeDeg attitude_deg(const AircraftState& state);

/// Angle of attack and sideslip in radians.
struct AeroAngles {
  double alpha;
  double beta;
};
AeroAngles aero_angles(const AircraftState& state);

/// Specific mechanical energy g*h + V^2/2 (J/kg).
double specific_energy(const AircraftState& state);

}  // namespace amrl::flightdyn
