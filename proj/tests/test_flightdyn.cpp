#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "amrl/error.hpp"
#include "amrl/flightdyn.hpp"

using namespace amrl;
using namespace amrl::flightdyn;

namespace {

/// Independent standard-atmosphere closed form (SI, geopotential altitude).
struct IsaOracle {
  double density, sound_speed, temperature;
};

IsaOracle isa_oracle(double altitude_ft) {
  const double h = altitude_ft * 0.3048;
  const double g0 = 9.80665, r = 287.05287, lapse = 0.0065, t0 = 288.15, p0 = 101325.0;
  double t, p;
  if (h <= 11000.0) {
    t = t0 - lapse * h;
    p = p0 * std::pow(t / t0, g0 / (r * lapse));
  } else {
    const double t11 = t0 - lapse * 11000.0;
    const double p11 = p0 * std::pow(t11 / t0, g0 / (r * lapse));
    t = t11;
    p = p11 * std::exp(-g0 * (h - 11000.0) / (r * t11));
  }
  return {p / (r * t), std::sqrt(1.4 * r * t), t};
}

double climb_rate(const AircraftState& s) { return -s.velocity_ned().z; }

}  // namespace

TEST_CASE("standard atmosphere matches the closed-form oracle") {
  for (double ft : {0.0, 4000.0, 20000.0, 36089.0, 40000.0, 55000.0}) {
    const Atmosphere a = isa_atmosphere(ft);
    const IsaOracle o = isa_oracle(ft);
    CHECK(a.density == doctest::Approx(o.density).epsilon(1e-5));
    CHECK(a.sound_speed == doctest::Approx(o.sound_speed).epsilon(1e-5));
  }
  const Atmosphere sl = isa_atmosphere(0.0);
  CHECK(sl.sound_speed == doctest::Approx(340.29).epsilon(1e-4));
  CHECK(sl.density == doctest::Approx(1.225).epsilon(1e-4));
  CHECK(isa_atmosphere(4000.0).density < sl.density);
  CHECK(isa_atmosphere(36090.0).temperature == doctest::Approx(isa_atmosphere(40000.0).temperature).epsilon(1e-12));
  CHECK_THROWS_AS(isa_atmosphere(-1.0), DomainError);
  CHECK_THROWS_AS(isa_atmosphere(60001.0), DomainError);
}

TEST_CASE("density decreases monotonically with altitude") {
  double prev = isa_atmosphere(0.0).density;
  for (double ft = 500.0; ft <= 60000.0; ft += 500.0) {
    const double d = isa_atmosphere(ft).density;
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("trim produces a steady wings-level state") {
  const AircraftParams p = genjet();
  const Trim trim = trim_state(4000.0, 0.6, 0.0, p);
  const AttitudeDeg att = attitude_deg(trim.state);
  CHECK(std::abs(att.roll) <= 0.01);
  CHECK(std::abs(flight_path_angle(trim.state)) <= 0.05);
  CHECK(std::abs(att.yaw) <= 1e-9);
  CHECK(std::abs(mach_of(trim.state) - 0.6) <= 0.005);
  CHECK(trim.controls.in_range());

  AircraftState s = trim.state;
  for (int i = 0; i < 100; ++i) s = step(s, trim.controls, 0.01, p);
  CHECK(std::abs(s.altitude_ft() - 4000.0) < 0.5);
}

TEST_CASE("trim at another heading differs only in yaw") {
  const AircraftParams p = genjet();
  const Trim a = trim_state(4000.0, 0.6, 0.0, p);
  const Trim b = trim_state(4000.0, 0.6, 237.0, p);
  CHECK(attitude_deg(b.state).yaw == doctest::Approx(237.0).epsilon(1e-9));
  CHECK(attitude_deg(b.state).roll == doctest::Approx(attitude_deg(a.state).roll));
  CHECK(attitude_deg(b.state).pitch == doctest::Approx(attitude_deg(a.state).pitch));
  CHECK(b.state.velocity_body.x == a.state.velocity_body.x);
  CHECK(b.state.velocity_body.z == a.state.velocity_body.z);
  CHECK(b.controls.throttle_cmd == a.controls.throttle_cmd);
  CHECK(b.controls.elevator_cmd == a.controls.elevator_cmd);
}

TEST_CASE("trim outside the envelope is rejected") {
  CHECK_THROWS_AS(trim_state(4000.0, 2.5, 0.0, genjet()), InfeasibleTrim);
  CHECK_THROWS_AS(trim_state(4000.0, 0.05, 0.0, genjet()), InfeasibleTrim);
}

TEST_CASE("free fall without thrust or lift") {
  AircraftParams p = genjet();
  p.cl0 = 0.0;
  p.cl_alpha = 1e-9;
  p.cd0 = 1e-9;
  p.k_induced = 0.0;
  AircraftState s;
  s.position_ned = {0.0, 0.0, -3000.0};
  s.velocity_body = {100.0, 0.0, 0.0};
  const ControlInputs idle{0.0, 0.0, 0.0, 0.0};
  const double dt = 0.01;
  double prev = s.velocity_ned().z;
  for (int i = 0; i < 20; ++i) {
    s = step(s, idle, dt, p);
    const double vz = s.velocity_ned().z;
    CHECK(vz - prev == doctest::Approx(kGravity * dt).epsilon(1e-3));
    prev = vz;
  }
}

TEST_CASE("pitch rate never exceeds the limit") {
  const AircraftParams p = genjet();
  const double limit = p.pitch_rate_limit_dps * kDegToRad;
  for (double elev : {-1.0, 1.0}) {
    AircraftState s = trim_state(4000.0, 0.6, 0.0, p).state;
    const ControlInputs c{0.0, elev, 0.0, 1.0};
    for (int i = 0; i < 1500; ++i) {
      s = step(s, c, 0.01, p);
      CHECK(std::abs(s.body_rates.y) <= limit + 1e-15);
    }
  }
}

TEST_CASE("quaternion norm holds over 1e5 steps") {
  const AircraftParams p = genjet();
  AircraftState s = trim_state(20000.0, 0.7, 30.0, p).state;
  const ControlInputs c{0.3, 0.2, -0.4, 0.8};
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    s = step(s, c, 0.01, p);
    worst = std::max(worst, std::abs(norm(s.attitude_quat) - 1.0));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("step is deterministic") {
  const AircraftParams p = genjet();
  AircraftState a = trim_state(4000.0, 0.6, 10.0, p).state;
  AircraftState b = a;
  const ControlInputs c{0.1, -0.2, 0.05, 0.7};
  for (int i = 0; i < 500; ++i) {
    a = step(a, c, 0.01, p);
    b = step(b, c, 0.01, p);
  }
  CHECK(a.position_ned.x == b.position_ned.x);
  CHECK(a.attitude_quat.w == b.attitude_quat.w);
  CHECK(a.body_rates.z == b.body_rates.z);
}

TEST_CASE("specific energy does not increase with the throttle closed") {
  const AircraftParams p = genjet();
  AircraftState s = trim_state(8000.0, 0.6, 0.0, p).state;
  s.throttle = 0.0;
  const ControlInputs c{0.05, 0.15, 0.0, 0.0};
  double prev = specific_energy(s);
  for (int i = 0; i < 3000; ++i) {
    s = step(s, c, 0.01, p);
    const double e = specific_energy(s);
    CHECK(e <= prev + 1e-12 * std::abs(prev));
    prev = e;
  }
}

TEST_CASE("full elevator pulls the aircraft through the vertical") {
  const AircraftParams p = genjet();
  AircraftState s = trim_state(4000.0, 0.6, 0.0, p).state;
  const ControlInputs c{0.0, 1.0, 0.0, 1.0};
  double max_gamma = -90.0;
  Quat prev = s.attitude_quat;
  for (int i = 0; i < 2000; ++i) {
    s = step(s, c, 0.01, p);
    REQUIRE(std::isfinite(s.attitude_quat.w));
    const Quat q = s.attitude_quat;
    const double dot = q.w * prev.w + q.x * prev.x + q.y * prev.y + q.z * prev.z;
    CHECK(std::abs(dot) > 0.999);
    prev = q;
    max_gamma = std::max(max_gamma, flight_path_angle(s));
  }
  CHECK(max_gamma > 89.0);
}

TEST_CASE("flight path angle examples") {
  AircraftState s;
  s.velocity_body = {200.0, 0.0, 0.0};
  CHECK(flight_path_angle(s) == doctest::Approx(0.0));
  s.attitude_quat = quat_from_euler({0.0, 90.0 * kDegToRad, 0.0});
  CHECK(flight_path_angle(s) == doctest::Approx(90.0));
  s.attitude_quat = quat_from_euler({0.0, 30.0 * kDegToRad, 0.0});
  CHECK(flight_path_angle(s) == doctest::Approx(30.0));
  s.velocity_body = {0.5, 0.0, 0.0};
  CHECK_THROWS_AS(flight_path_angle(s), UndefinedGamma);
}

TEST_CASE("mach examples") {
  AircraftState s;
  s.position_ned = {0.0, 0.0, -10000.0 / kFeetPerMeter};
  s.velocity_body = {isa_atmosphere(10000.0).sound_speed, 0.0, 0.0};
  CHECK(mach_of(s) == doctest::Approx(1.0).epsilon(1e-12));
  s.velocity_body = {0.0, 0.0, 0.0};
  CHECK(mach_of(s) == 0.0);
  s.velocity_body = {200.0, 0.0, 0.0};
  const double low = mach_of(s);
  s.position_ned.z = -20000.0 / kFeetPerMeter;
  CHECK(mach_of(s) > low);
}

TEST_CASE("invalid step inputs") {
  const AircraftParams p = genjet();
  const AircraftState s = trim_state(4000.0, 0.6, 0.0, p).state;
  CHECK_THROWS_AS(step(s, {0, 0, 0, 0.5}, 0.0, p), DomainError);
  CHECK_THROWS_AS(step(s, {0, 0, 0, 0.5}, 0.06, p), DomainError);
  CHECK_THROWS_AS(step(s, {1.5, 0, 0, 0.5}, 0.01, p), DomainError);
  AircraftState bad = s;
  bad.velocity_body.x = std::nan("");
  try {
    step(bad, {0, 0, 0, 0.5}, 0.01, p);
    FAIL("expected a simulation fault");
  } catch (const SimulationFault& f) {
    CHECK(!f.field().empty());
  }
}

TEST_CASE("aircraft parameter file round-trips and rejects unknown keys") {
  std::stringstream ss;
  write_params(ss, genjet());
  const AircraftParams back = parse_params(ss);
  CHECK(back.mass == genjet().mass);
  CHECK(back.control_effectiveness == genjet().control_effectiveness);

  std::stringstream extra;
  write_params(extra, genjet());
  extra << "wingspan = 9\n";
  CHECK_THROWS_AS(parse_params(extra), ParseError);

  std::stringstream bad;
  write_params(bad, genjet());
  std::string text = bad.str();
  text.replace(text.find("mass = 4500"), 11, "mass = -1");
  std::stringstream neg(text);
  CHECK_THROWS_AS(parse_params(neg), DomainError);
}

TEST_CASE("the shipped genjet file matches the built-in parameters") {
  std::ifstream in(std::string(AMRL_SOURCE_DIR) + "/config/genjet.params");
  REQUIRE(in);
  CHECK(parse_params(in) == genjet());
}
