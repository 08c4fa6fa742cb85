#include "amrl/flightdyn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "amrl/error.hpp"
#include "amrl/kv.hpp"

namespace amrl::flightdyn {

namespace {

constexpr double kGasConstant = 287.05287;  // J/(kg K)
constexpr double kGammaAir = 1.4;
constexpr double kSeaLevelTemp = 288.15;    // K
constexpr double kSeaLevelPressure = 101325.0;
constexpr double kLapseRate = 0.0065;       // K/m
constexpr double kTropopauseM = 11000.0;

Atmosphere atmosphere_m(double h) {
  double temp = 0.0;
  double pressure = 0.0;
  if (h <= kTropopauseM) {
    temp = kSeaLevelTemp - kLapseRate * h;
    pressure = kSeaLevelPressure *
               std::pow(temp / kSeaLevelTemp, kGravity / (kLapseRate * kGasConstant));
  } else {
    const double t11 = kSeaLevelTemp - kLapseRate * kTropopauseM;
    const double p11 = kSeaLevelPressure *
                       std::pow(t11 / kSeaLevelTemp, kGravity / (kLapseRate * kGasConstant));
    temp = t11;
    pressure = p11 * std::exp(-kGravity * (h - kTropopauseM) / (kGasConstant * t11));
  }
  return {pressure / (kGasConstant * temp), std::sqrt(kGammaAir * kGasConstant * temp), temp};
}

// The simulator keeps running outside the tabulated band; it reads the
// atmosphere at the nearest valid altitude.
Atmosphere atmosphere_clamped(double altitude_ft) {
  return atmosphere_m(std::clamp(altitude_ft, 0.0, kMaxAltitudeFt) / kFeetPerMeter);
}

struct Derivative {
  Vec3 position;
  Vec3 velocity;
  Quat attitude;
  Vec3 rates;
  std::array<double, 3> deflections{};
  double throttle = 0.0;
};

double lift_coefficient(double alpha, const AircraftParams& p) {
  const double stall = p.alpha_stall_deg * kDegToRad;
  return p.cl0 + p.cl_alpha * std::clamp(alpha, -stall, stall);
}

bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

void check_finite(const Derivative& d) {
  if (!finite(d.position)) throw SimulationFault("position_ned");
  if (!finite(d.velocity)) throw SimulationFault("velocity_body");
  if (!std::isfinite(d.attitude.w) || !std::isfinite(d.attitude.x) || !std::isfinite(d.attitude.y) ||
      !std::isfinite(d.attitude.z)) {
    throw SimulationFault("attitude_quat");
  }
  if (!finite(d.rates)) throw SimulationFault("body_rates");
  for (double v : d.deflections) {
    if (!std::isfinite(v)) throw SimulationFault("actuator_positions");
  }
  if (!std::isfinite(d.throttle)) throw SimulationFault("throttle");
}

Derivative derivative(const AircraftState& s, const ControlInputs& c, const AircraftParams& p) {
  Derivative d;
  const double tau = p.actuator_time_constant_s;
  const std::array<double, 3> cmd{c.aileron_cmd, c.elevator_cmd, c.rudder_cmd};
  for (std::size_t i = 0; i < 3; ++i) {
    d.deflections[i] = (cmd[i] * p.max_deflection_deg[i] * kDegToRad - s.deflections[i]) / tau;
  }
  d.throttle = (c.throttle_cmd - s.throttle) / tau;

  const Vec3& v = s.velocity_body;
  const double speed = norm(v);
  const Atmosphere atm = atmosphere_clamped(s.altitude_ft());
  const double qbar_s = 0.5 * atm.density * speed * speed * p.wing_area;

  Vec3 aero;
  if (speed > 1e-9) {
    const double alpha = std::atan2(v.z, v.x);
    const double beta = std::asin(std::clamp(v.y / speed, -1.0, 1.0));
    const double weight = p.mass * kGravity;
    const double lift_max = p.max_load_factor_g * weight;
    const double lift = std::clamp(qbar_s * lift_coefficient(alpha, p), -lift_max, lift_max);
    const double cl_eff = qbar_s > 0.0 ? lift / qbar_s : 0.0;
    const double drag = qbar_s * (p.cd0 + p.k_induced * cl_eff * cl_eff);
    const double side = qbar_s * p.cy_beta * beta;

    const Vec3 v_hat = v * (1.0 / speed);
    const double xz = std::hypot(v.x, v.z);
    const Vec3 lift_dir = xz > 1e-9 ? Vec3{v.z / xz, 0.0, -v.x / xz} : Vec3{};
    aero = lift_dir * lift - v_hat * drag + Vec3{0.0, side, 0.0};
  }
  const Vec3 thrust{s.throttle * p.max_thrust, 0.0, 0.0};
  const Vec3 gravity_body = rotate_inverse(s.attitude_quat, Vec3{0.0, 0.0, kGravity});
  const Vec3& w = s.body_rates;
  d.velocity = (aero + thrust) * (1.0 / p.mass) + gravity_body - cross(w, v);

  const std::array<double, 3> rates{w.x, w.y, w.z};
  std::array<double, 3> acc{};
  for (std::size_t i = 0; i < 3; ++i) {
    acc[i] = p.control_effectiveness[i] * s.deflections[i] - p.rate_damping[i] * rates[i];
  }
  const double q_lim = p.pitch_rate_limit_dps * kDegToRad;
  if ((w.y >= q_lim && acc[kPitch] > 0.0) || (w.y <= -q_lim && acc[kPitch] < 0.0)) acc[kPitch] = 0.0;
  d.rates = {acc[0], acc[1], acc[2]};

  d.attitude = hamilton(s.attitude_quat, Quat{0.0, w.x, w.y, w.z}) * 0.5;
  d.position = rotate(s.attitude_quat, v);
  check_finite(d);
  return d;
}

AircraftState advance(const AircraftState& s, const Derivative& d, double h) {
  AircraftState out = s;
  out.position_ned = s.position_ned + d.position * h;
  out.velocity_body = s.velocity_body + d.velocity * h;
  out.attitude_quat = s.attitude_quat + d.attitude * h;
  out.body_rates = s.body_rates + d.rates * h;
  for (std::size_t i = 0; i < 3; ++i) out.deflections[i] = s.deflections[i] + d.deflections[i] * h;
  out.throttle = s.throttle + d.throttle * h;
  return out;
}

template <typename T>
T rk4_combine(const T& a, const T& b, const T& c, const T& d) {
  return (a + b * 2.0 + c * 2.0 + d) * (1.0 / 6.0);
}

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string("aircraft parameter '") + field + "' must be positive and finite");
  }
}

}  // namespace

void AircraftParams::validate() const {
  require_positive(mass, "mass");
  require_positive(wing_area, "wing_area");
  require_positive(max_thrust, "max_thrust");
  require_positive(cl_alpha, "cl_alpha");
  require_positive(cd0, "cd0");
  if (!(k_induced >= 0.0)) throw DomainError("aircraft parameter 'k_induced' must be non-negative");
  if (!std::isfinite(cl0) || !std::isfinite(cy_beta)) throw DomainError("aerodynamic coefficients must be finite");
  for (double v : control_effectiveness) require_positive(v, "control_effectiveness");
  for (double v : rate_damping) require_positive(v, "rate_damping");
  require_positive(actuator_time_constant_s, "actuator_time_constant_s");
  for (double v : max_deflection_deg) require_positive(v, "max_deflection_deg");
  require_positive(pitch_rate_limit_dps, "pitch_rate_limit_dps");
  if (!(max_load_factor_g >= 1.0)) throw DomainError("aircraft parameter 'max_load_factor_g' must be >= 1");
  require_positive(alpha_stall_deg, "alpha_stall_deg");
}

AircraftParams genjet() { return AircraftParams{}; }

namespace {

using ScalarField = double AircraftParams::*;
using AxisField = std::array<double, 3> AircraftParams::*;

const std::vector<std::pair<std::string, ScalarField>>& scalar_fields() {
  static const std::vector<std::pair<std::string, ScalarField>> fields{
      {"mass", &AircraftParams::mass},
      {"wing_area", &AircraftParams::wing_area},
      {"max_thrust", &AircraftParams::max_thrust},
      {"cl0", &AircraftParams::cl0},
      {"cl_alpha", &AircraftParams::cl_alpha},
      {"cd0", &AircraftParams::cd0},
      {"k_induced", &AircraftParams::k_induced},
      {"cy_beta", &AircraftParams::cy_beta},
      {"actuator_time_constant_s", &AircraftParams::actuator_time_constant_s},
      {"pitch_rate_limit_dps", &AircraftParams::pitch_rate_limit_dps},
      {"max_load_factor_g", &AircraftParams::max_load_factor_g},
      {"alpha_stall_deg", &AircraftParams::alpha_stall_deg},
  };
  return fields;
}

const std::vector<std::pair<std::string, AxisField>>& axis_fields() {
  static const std::vector<std::pair<std::string, AxisField>> fields{
      {"control_effectiveness", &AircraftParams::control_effectiveness},
      {"rate_damping", &AircraftParams::rate_damping},
      {"max_deflection_deg", &AircraftParams::max_deflection_deg},
  };
  return fields;
}

}  // namespace

AircraftParams parse_params(std::istream& in) {
  AircraftParams p;
  std::map<std::string, bool> seen;
  for (const auto& [name, _] : scalar_fields()) seen[name] = false;
  for (const auto& [name, _] : axis_fields()) seen[name] = false;

  for (const kv::Entry& e : kv::parse(in)) {
    auto it = seen.find(e.key);
    if (it == seen.end()) throw ParseError("unknown aircraft parameter", e.line, e.key);
    it->second = true;
    try {
      bool done = false;
      for (const auto& [name, field] : scalar_fields()) {
        if (name == e.key) {
          p.*field = kv::to_double(e.value, e.key);
          done = true;
        }
      }
      for (const auto& [name, field] : axis_fields()) {
        if (done || name != e.key) continue;
        const auto parts = kv::split(e.value, ',');
        if (parts.size() != 3) throw ParseError("expected three comma-separated values", e.line, e.key);
        for (std::size_t i = 0; i < 3; ++i) (p.*field)[i] = kv::to_double(parts[i], e.key);
      }
    } catch (const ParseError& err) {
      if (err.row() != 0) throw;
      throw ParseError("not a number", e.line, e.key);
    }
  }
  for (const auto& [name, present] : seen) {
    if (!present) throw ParseError("missing aircraft parameter", 0, name);
  }
  p.validate();
  return p;
}

AircraftParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open aircraft file '" + path.string() + "'");
  return parse_params(in);
}

void write_params(std::ostream& out, const AircraftParams& p) {
  for (const auto& [name, field] : scalar_fields()) out << name << " = " << kv::format_double(p.*field) << '\n';
  for (const auto& [name, field] : axis_fields()) {
    const auto& a = p.*field;
    out << name << " = " << kv::format_double(a[0]) << ", " << kv::format_double(a[1]) << ", "
        << kv::format_double(a[2]) << '\n';
  }
}

bool ControlInputs::in_range() const {
  auto stick = [](double v) { return v >= -1.0 && v <= 1.0; };
  return stick(aileron_cmd) && stick(elevator_cmd) && stick(rudder_cmd) && throttle_cmd >= 0.0 &&
         throttle_cmd <= 1.0;
}

Atmosphere isa_atmosphere(double altitude_ft) {
  if (!(altitude_ft >= 0.0 && altitude_ft <= kMaxAltitudeFt)) {
    throw DomainError("altitude " + std::to_string(altitude_ft) + " ft outside [0, 60000] ft");
  }
  return atmosphere_m(altitude_ft / kFeetPerMeter);
}

AircraftState step(const AircraftState& s, const ControlInputs& c, double dt, const AircraftParams& p) {
  if (!(dt > 0.0 && dt <= 0.05)) throw DomainError("dt must lie in (0, 0.05]");
  if (!c.in_range()) throw DomainError("control inputs out of range");

  const Derivative k1 = derivative(s, c, p);
  const Derivative k2 = derivative(advance(s, k1, 0.5 * dt), c, p);
  const Derivative k3 = derivative(advance(s, k2, 0.5 * dt), c, p);
  const Derivative k4 = derivative(advance(s, k3, dt), c, p);

  Derivative sum;
  sum.position = rk4_combine(k1.position, k2.position, k3.position, k4.position);
  sum.velocity = rk4_combine(k1.velocity, k2.velocity, k3.velocity, k4.velocity);
  sum.attitude = rk4_combine(k1.attitude, k2.attitude, k3.attitude, k4.attitude);
  sum.rates = rk4_combine(k1.rates, k2.rates, k3.rates, k4.rates);
  for (std::size_t i = 0; i < 3; ++i) {
    sum.deflections[i] =
        (k1.deflections[i] + 2.0 * k2.deflections[i] + 2.0 * k3.deflections[i] + k4.deflections[i]) / 6.0;
  }
  sum.throttle = (k1.throttle + 2.0 * k2.throttle + 2.0 * k3.throttle + k4.throttle) / 6.0;

  AircraftState out = advance(s, sum, dt);
  out.attitude_quat = normalized(out.attitude_quat);
  const double q_lim = p.pitch_rate_limit_dps * kDegToRad;
  out.body_rates.y = std::clamp(out.body_rates.y, -q_lim, q_lim);
  out.throttle = std::clamp(out.throttle, 0.0, 1.0);
  out.time_s = s.time_s + dt;
  return out;
}

Trim trim_state(double altitude_ft, double mach, double heading_deg, const AircraftParams& p) {
  p.validate();
  if (!(mach > 0.1 && mach < 0.95)) {
    throw InfeasibleTrim("no trim: Mach " + std::to_string(mach) + " outside (0.1, 0.95)");
  }
  const Atmosphere atm = isa_atmosphere(altitude_ft);
  const double speed = mach * atm.sound_speed;
  const double qbar_s = 0.5 * atm.density * speed * speed * p.wing_area;
  const double weight = p.mass * kGravity;

  // Normal-force balance g(alpha) = 0 in body z; throttle then follows
  // from the axial balance and elevator from the pitch-moment balance.
  auto normal = [&](double alpha) {
    const double cl = p.cl0 + p.cl_alpha * alpha;
    const double lift = qbar_s * cl;
    const double drag = qbar_s * (p.cd0 + p.k_induced * cl * cl);
    return -drag * std::sin(alpha) - lift * std::cos(alpha) + weight * std::cos(alpha);
  };
  double alpha = (weight / qbar_s - p.cl0) / p.cl_alpha;
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    const double f = normal(alpha);
    const double h = 1e-7;
    const double df = (normal(alpha + h) - normal(alpha - h)) / (2.0 * h);
    if (df == 0.0 || !std::isfinite(df)) break;
    const double delta = std::clamp(-f / df, -0.05, 0.05);
    alpha += delta;
    if (std::abs(delta) < 1e-14 || std::abs(normal(alpha)) < 1e-9 * weight) {
      converged = true;
      break;
    }
  }
  const double stall = p.alpha_stall_deg * kDegToRad;
  if (!converged || std::abs(alpha) >= stall) {
    throw InfeasibleTrim("no trim: required angle of attack outside the linear lift range");
  }
  const double cl = p.cl0 + p.cl_alpha * alpha;
  const double lift = qbar_s * cl;
  const double drag = qbar_s * (p.cd0 + p.k_induced * cl * cl);
  const double throttle = (drag * std::cos(alpha) - lift * std::sin(alpha) + weight * std::sin(alpha)) / p.max_thrust;
  if (!(throttle >= 0.0 && throttle <= 1.0)) {
    throw InfeasibleTrim("no trim: required throttle " + std::to_string(throttle) + " outside [0, 1]");
  }
  // Zero pitch rate with zero pitch acceleration needs zero deflection.
  const double elevator = 0.0;

  Trim t;
  t.state.position_ned = {0.0, 0.0, -altitude_ft / kFeetPerMeter};
  t.state.velocity_body = {speed * std::cos(alpha), 0.0, speed * std::sin(alpha)};
  t.state.attitude_quat = quat_from_euler({0.0, alpha, wrap_360(heading_deg) * kDegToRad});
  t.state.deflections = {0.0, elevator, 0.0};
  t.state.throttle = throttle;
  t.controls = {0.0, elevator / (p.max_deflection_deg[kPitch] * kDegToRad), 0.0, throttle};
  return t;
}

double flight_path_angle(const AircraftState& s) {
  const double speed = s.true_airspeed();
  if (!(speed > 1.0)) throw UndefinedGamma("flight path angle undefined below 1 m/s airspeed");
  const double climb = -s.velocity_ned().z;
  return std::asin(std::clamp(climb / speed, -1.0, 1.0)) * kRadToDeg;
}

double mach_of(const AircraftState& s) {
  return s.true_airspeed() / atmosphere_clamped(s.altitude_ft()).sound_speed;
}

AttitudeDeg attitude_deg(const AircraftState& s) {
  const Euler e = euler_from_quat(s.attitude_quat);
  return {wrap_180(e.roll * kRadToDeg), e.pitch * kRadToDeg, wrap_360(e.yaw * kRadToDeg)};
}

AeroAngles aero_angles(const AircraftState& s) {
  const Vec3& v = s.velocity_body;
  const double speed = norm(v);
  if (speed < 1e-9) return {0.0, 0.0};
  return {std::atan2(v.z, v.x), std::asin(std::clamp(v.y / speed, -1.0, 1.0))};
}

double specific_energy(const AircraftState& s) {
  const double v = s.true_airspeed();
  return kGravity * (-s.position_ned.z) + 0.5 * v * v;
}

}  // namespace amrl::flightdyn
