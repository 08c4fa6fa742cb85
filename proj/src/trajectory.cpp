#include "amrl/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "amrl/error.hpp"
#include "amrl/kv.hpp"

namespace amrl::trajectory {

bool TargetPoint::valid() const {
  return std::isfinite(roll_deg) && roll_deg > -180.0 && roll_deg <= 180.0 && gamma_deg >= -90.0 &&
         gamma_deg <= 90.0 && yaw_deg >= 0.0 && yaw_deg < 360.0 && std::isfinite(mach) && mach > 0.0;
}

ManeuverTrajectory::ManeuverTrajectory(double dt_s, std::vector<TargetPoint> points, std::string kind,
                                       Source source)
    : dt_s_(dt_s), points_(std::move(points)), kind_(std::move(kind)), source_(source) {
  if (!(dt_s_ > 0.0) || !std::isfinite(dt_s_)) throw DomainError("trajectory dt must be positive");
  if (points_.size() < 2) throw DomainError("trajectory needs at least 2 points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].valid()) throw DomainError("trajectory point " + std::to_string(i) + " out of range");
  }
}

namespace {

std::size_t point_count(double duration_s, double dt_s) {
  if (!(duration_s > 0.0) || !(dt_s > 0.0)) throw DomainError("duration and dt must be positive");
  const double steps = std::round(duration_s / dt_s);
  if (steps < 1.0) throw DomainError("duration shorter than one timestep");
  return static_cast<std::size_t>(steps) + 1;
}

double fraction(std::size_t i, std::size_t n) { return static_cast<double>(i) / static_cast<double>(n - 1); }

void require_mach(double entry_mach, double mach_dip) {
  if (!(entry_mach - mach_dip > 0.1)) throw DomainError("entry_mach - mach_dip must exceed 0.1");
  if (!(mach_dip >= 0.0)) throw DomainError("mach_dip must be non-negative");
}

}  // namespace

ManeuverTrajectory generate_loop(double duration_s, double entry_yaw_deg, double entry_mach, double mach_dip,
                                 double dt_s) {
  require_mach(entry_mach, mach_dip);
  const std::size_t n = point_count(duration_s, dt_s);
  const double yaw0 = wrap_360(entry_yaw_deg);
  const double yaw_flip = wrap_360(entry_yaw_deg + 180.0);
  const std::size_t last = n - 1;
  std::size_t edge[5];
  for (std::size_t k = 0; k <= 4; ++k) edge[k] = (2 * k * last + 4) / 8;  // round(k * last / 4)
  auto ramp = [&](std::size_t i, std::size_t k) {
    const std::size_t span = edge[k + 1] - edge[k];
    return span == 0 ? 1.0 : static_cast<double>(i - edge[k]) / static_cast<double>(span);
  };
  std::vector<TargetPoint> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Quarter boundaries belong to the earlier phase: the apex is upright
    // at 90 degrees, the bottom of the descent inverted at -90.
    TargetPoint& p = pts[i];
    if (i <= edge[1]) {
      p = {0.0, 90.0 * ramp(i, 0), yaw0, 0.0};
    } else if (i <= edge[2]) {
      p = {180.0, 90.0 * (1.0 - ramp(i, 1)), yaw_flip, 0.0};
    } else if (i <= edge[3]) {
      p = {180.0, -90.0 * ramp(i, 2), yaw_flip, 0.0};
    } else {
      p = {0.0, -90.0 * (1.0 - ramp(i, 3)), yaw0, 0.0};
    }
    const double sn = std::sin(std::numbers::pi * fraction(i, n));
    p.mach = entry_mach - mach_dip * sn * sn;
  }
  return {dt_s, std::move(pts), "loop", Source::kHandcrafted};
}

ManeuverTrajectory generate_immelmann(double duration_s, double entry_yaw_deg, double entry_mach, double mach_dip,
                                      double roll_fraction, double dt_s) {
  require_mach(entry_mach, mach_dip);
  if (!(roll_fraction > 0.1 && roll_fraction < 0.5)) throw DomainError("roll_fraction must lie in (0.1, 0.5)");
  const std::size_t n = point_count(duration_s, dt_s);
  const double yaw0 = wrap_360(entry_yaw_deg);
  const double yaw_flip = wrap_360(entry_yaw_deg + 180.0);
  const std::size_t last = n - 1;
  const auto loop_end = static_cast<std::size_t>(std::llround((1.0 - roll_fraction) * static_cast<double>(last)));
  const std::size_t apex = (loop_end + 1) / 2;
  if (apex == 0 || loop_end == apex || loop_end >= last) throw DomainError("immelmann too short for dt");
  std::vector<TargetPoint> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    TargetPoint& p = pts[i];
    if (i <= apex) {
      p = {0.0, 90.0 * static_cast<double>(i) / static_cast<double>(apex), yaw0, 0.0};
    } else if (i <= loop_end) {
      p = {180.0, 90.0 * static_cast<double>(loop_end - i) / static_cast<double>(loop_end - apex), yaw_flip, 0.0};
    } else {
      const double f = static_cast<double>(i - loop_end) / static_cast<double>(last - loop_end);
      p = {wrap_180(180.0 + 180.0 * f), 0.0, yaw_flip, 0.0};
    }
    p.mach = entry_mach - mach_dip * fraction(i, n);
  }
  pts.back().roll_deg = 0.0;
  pts.back().gamma_deg = 0.0;
  return {dt_s, std::move(pts), "immelmann", Source::kHandcrafted};
}

ManeuverTrajectory generate_barrel_roll(double duration_s, double entry_yaw_deg, double entry_mach,
                                        double pitch_amplitude_deg, double yaw_amplitude_deg, double dt_s) {
  if (!(pitch_amplitude_deg > 5.0 && pitch_amplitude_deg < 45.0) ||
      !(yaw_amplitude_deg > 5.0 && yaw_amplitude_deg < 45.0)) {
    throw DomainError("barrel roll amplitudes must lie in (5, 45) degrees");
  }
  if (!(entry_mach > 0.1)) throw DomainError("entry_mach must exceed 0.1");
  const std::size_t n = point_count(duration_s, dt_s);
  std::vector<TargetPoint> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = fraction(i, n);
    const double phase = 2.0 * std::numbers::pi * s;
    pts[i] = {wrap_180(360.0 * s), pitch_amplitude_deg * std::sin(phase),
              wrap_360(entry_yaw_deg + yaw_amplitude_deg * (1.0 - std::cos(phase))), entry_mach};
  }
  pts.back() = {0.0, 0.0, wrap_360(entry_yaw_deg), entry_mach};
  return {dt_s, std::move(pts), "barrel_roll", Source::kHandcrafted};
}

ManeuverTrajectory generate_level(double duration_s, double yaw_deg, double mach, double dt_s) {
  if (!(mach > 0.0)) throw DomainError("mach must be positive");
  const std::size_t n = point_count(duration_s, dt_s);
  std::vector<TargetPoint> pts(n, TargetPoint{0.0, 0.0, wrap_360(yaw_deg), mach});
  return {dt_s, std::move(pts), "level", Source::kHandcrafted};
}

ManeuverTrajectory add_pilot_noise(const ManeuverTrajectory& traj, double amplitude_deg, std::uint64_t seed,
                                   double cutoff_hz) {
  if (!(amplitude_deg >= 0.0) || !(cutoff_hz > 0.0)) throw DomainError("noise amplitude/cutoff out of range");
  constexpr int kTones = 8;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(0.05 * cutoff_hz, cutoff_hz);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  // Four channels, each a sum of random-phase tones below the cutoff.
  double tones[4][kTones][2];
  for (auto& channel : tones) {
    for (auto& tone : channel) {
      tone[0] = freq(rng);
      tone[1] = phase(rng);
    }
  }
  const std::size_t n = traj.size();
  std::vector<TargetPoint> pts = traj.points();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double t = traj.dt_s() * static_cast<double>(i);
    const double window = std::sin(std::numbers::pi * fraction(i, n));
    double noise[4] = {0.0, 0.0, 0.0, 0.0};
    for (int c = 0; c < 4; ++c) {
      for (const auto& tone : tones[c]) noise[c] += std::sin(2.0 * std::numbers::pi * tone[0] * t + tone[1]);
      noise[c] *= amplitude_deg * window / std::sqrt(0.5 * kTones);
    }
    TargetPoint& p = pts[i];
    p.roll_deg = wrap_180(p.roll_deg + noise[0]);
    p.gamma_deg = std::clamp(p.gamma_deg + noise[1], -90.0, 90.0);
    p.yaw_deg = wrap_360(p.yaw_deg + noise[2]);
    p.mach = std::max(0.05, p.mach + 0.002 * noise[3]);
  }
  return {traj.dt_s(), std::move(pts), traj.kind(), traj.source()};
}

void write_csv(std::ostream& out, const ManeuverTrajectory& traj) {
  out << "t_s,roll_deg,gamma_deg,yaw_deg,mach\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const TargetPoint& p = traj[i];
    out << kv::format_double(traj.dt_s() * static_cast<double>(i)) << ',' << kv::format_double(p.roll_deg) << ','
        << kv::format_double(p.gamma_deg) << ',' << kv::format_double(p.yaw_deg) << ','
        << kv::format_double(p.mach) << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const ManeuverTrajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_csv(out, traj);
}

ManeuverTrajectory read_csv(std::istream& in, const std::string& kind) {
  static const std::vector<std::string> kColumns{"t_s", "roll_deg", "gamma_deg", "yaw_deg", "mach"};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file", 0, "");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = kv::split(line, ',');
  for (const auto& col : kColumns) {
    if (std::find(header.begin(), header.end(), col) == header.end()) throw ParseError("missing column", 0, col);
  }
  if (header != kColumns) throw ParseError("header must be exactly t_s,roll_deg,gamma_deg,yaw_deg,mach", 0, "");

  std::vector<double> times;
  std::vector<TargetPoint> pts;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (kv::trim(line).empty()) continue;
    ++row;
    const auto fields = kv::split(line, ',');
    if (fields.size() != kColumns.size()) {
      throw ParseError("expected 5 fields, got " + std::to_string(fields.size()), row,
                       fields.size() < kColumns.size() ? kColumns[fields.size()] : "");
    }
    double v[5];
    for (std::size_t c = 0; c < 5; ++c) {
      try {
        v[c] = kv::to_double(fields[c], kColumns[c]);
      } catch (const ParseError&) {
        throw ParseError("not a number: '" + fields[c] + "'", row, kColumns[c]);
      }
    }
    if (!(v[1] > -180.0 && v[1] <= 180.0)) throw ParseError("roll outside (-180, 180]", row, "roll_deg");
    if (!(v[2] >= -90.0 && v[2] <= 90.0)) throw ParseError("gamma outside [-90, 90]", row, "gamma_deg");
    if (!(v[3] >= 0.0 && v[3] < 360.0)) throw ParseError("yaw outside [0, 360)", row, "yaw_deg");
    if (!(v[4] > 0.0) || !std::isfinite(v[4])) throw ParseError("mach must be positive", row, "mach");
    times.push_back(v[0]);
    pts.push_back({v[1], v[2], v[3], v[4]});
  }
  if (pts.size() < 2) throw ParseError("need at least 2 rows", row, "");
  const double dt = times[1] - times[0];
  if (!(dt > 0.0)) throw ParseError("time column must increase", 2, "t_s");
  for (std::size_t i = 2; i < times.size(); ++i) {
    if (std::abs(times[i] - times.front() - dt * static_cast<double>(i)) > 1e-6) {
      throw ParseError("non-uniform dt", i + 1, "t_s");
    }
  }
  return {dt, std::move(pts), kind, Source::kLoaded};
}

ManeuverTrajectory load_pilot_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_csv(in, path.stem().string());
}

ManeuverTrajectory rebase_yaw(const ManeuverTrajectory& traj, double new_initial_yaw_deg) {
  std::vector<TargetPoint> pts = traj.points();
  const double yaw0 = traj[0].yaw_deg;
  for (TargetPoint& p : pts) p.yaw_deg = wrap_360(p.yaw_deg - yaw0 + new_initial_yaw_deg);
  return {traj.dt_s(), std::move(pts), traj.kind(), traj.source()};
}

std::size_t horizon_steps(const ManeuverTrajectory& traj, double agent_hz, double tau) {
  if (!(tau > 0.0) || !(agent_hz > 0.0)) throw DomainError("tau and agent_hz must be positive");
  const double steps = std::ceil(traj.duration_s() * tau * agent_hz - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(steps));
}

Sample sample_target(const ManeuverTrajectory& traj, std::size_t agent_step, double agent_hz, double tau) {
  const std::size_t horizon = horizon_steps(traj, agent_hz, tau);
  const std::size_t last = traj.size() - 1;
  const std::size_t step = std::min(agent_step, horizon);
  // round(step / horizon * last), half away from zero, in integers
  const std::size_t index = std::min(last, (2 * step * last + horizon) / (2 * horizon));
  Sample s;
  s.target = traj[index];
  s.index = index;
  s.remaining_fraction = 1.0 - static_cast<double>(step) / static_cast<double>(horizon);
  s.done = agent_step >= horizon;
  return s;
}

FeasibilityReport check_feasibility(const ManeuverTrajectory& traj, double tau,
                                    const flightdyn::AircraftParams& params, double altitude_ft) {
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  FeasibilityReport r;
  r.limit_pitch_rate_dps = params.pitch_rate_limit_dps;
  r.limit_load_factor_g = params.max_load_factor_g;
  r.required_peak_load_factor_g = 1.0;
  const double sound_speed = flightdyn::isa_atmosphere(altitude_ft).sound_speed;
  const double scaled_dt = traj.dt_s() * tau;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    // Gamma is continuous through the vertical, so the Euler roll/yaw flip
    // never enters the rate estimate.
    const double rate_dps = std::abs(traj[i].gamma_deg - traj[i - 1].gamma_deg) / scaled_dt;
    const double speed = 0.5 * (traj[i].mach + traj[i - 1].mach) * sound_speed;
    const double load = 1.0 + speed * rate_dps * kDegToRad / flightdyn::kGravity;
    r.required_peak_pitch_rate_dps = std::max(r.required_peak_pitch_rate_dps, rate_dps);
    r.required_peak_load_factor_g = std::max(r.required_peak_load_factor_g, load);
  }
  if (r.required_peak_pitch_rate_dps > r.limit_pitch_rate_dps) r.violations.emplace_back("pitch_rate");
  if (r.required_peak_load_factor_g > r.limit_load_factor_g) r.violations.emplace_back("load_factor");
  r.feasible = r.violations.empty();
  return r;
}

}  // namespace amrl::trajectory
