#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "amrl/checkpoint.hpp"
#include "amrl/environment.hpp"
#include "amrl/sac.hpp"

namespace amrl::harness {

/// Maps the current observation (and, for scripted test doubles, the
/// environment itself) to an action.
using Policy = std::function<env::Action(const env::Observation&, const env::Environment&)>;

/// Deterministic policy of a trained agent.
Policy agent_policy(const sac::SacAgent& agent);

struct TraceRow {
  double t_s = 0.0;
  trajectory::TargetPoint target;
  reward::Measured actual{};
  env::Action action{};

  bool operator==(const TraceRow&) const = default;
};

struct EvalReport {
  std::size_t episode = 0;
  std::uint64_t seed = 0;
  double rmse_roll = 0.0, rmse_gamma = 0.0, rmse_yaw = 0.0, rmse_mach = 0.0;
  double max_abs_roll = 0.0, max_abs_gamma = 0.0, max_abs_yaw = 0.0, max_abs_mach = 0.0;
  double mean_abs_roll = 0.0, mean_abs_gamma = 0.0, mean_abs_yaw = 0.0, mean_abs_mach = 0.0;
  double episode_return = 0.0;
  std::size_t steps = 0;
  bool terminated = false;  // ended before the horizon
  bool fault = false;
  std::vector<TraceRow> trace;

  bool operator==(const EvalReport&) const = default;
};

/// Error statistics of a trace, with wrapped roll and yaw differences.
void summarize(EvalReport& report);

struct EvalOptions {
  std::optional<double> tau;
  /// Episodes run concurrently when > 1; reports are assembled in order.
  int workers = 1;
};

std::vector<EvalReport> evaluate(const Policy& policy, const env::EpisodeConfig& config, std::size_t episodes,
                                 std::uint64_t seed, const EvalOptions& options = {});

struct Aggregate {
  std::size_t episodes = 0;
  std::size_t terminations = 0;
  double mean_rmse_roll = 0.0, mean_rmse_gamma = 0.0, mean_rmse_yaw = 0.0, mean_rmse_mach = 0.0;
  double mean_abs_roll = 0.0, mean_abs_gamma = 0.0;
  double mean_return = 0.0;
  double mean_steps = 0.0;
};
Aggregate aggregate(const std::vector<EvalReport>& reports);

/// Episode success: no divergence termination and mean |gamma| / |roll|
/// errors under the bounds.
bool success(const EvalReport& report, double gamma_bound_deg, double roll_bound_deg);

struct Segment {
  Policy policy;
  trajectory::ManeuverTrajectory maneuver;
  reward::RewardConfig reward;
  double tau = 1.0;
};

struct Handoff {
  std::size_t segment = 0;
  double roll_deg = 0.0, gamma_deg = 0.0, yaw_deg = 0.0, mach = 0.0, altitude_ft = 0.0;
  double roll_error_deg = 0.0, gamma_error_deg = 0.0;  // against the new segment's first target
};

struct ConcatReport {
  std::vector<EvalReport> segments;
  std::vector<Handoff> handoffs;  // one per segment start after the first
  std::optional<std::size_t> failed_segment;
};

/// Flies the segments back to back from one reset; each later segment's
/// reference is rebased to the aircraft's heading at handoff.
ConcatReport concat_eval(const std::vector<Segment>& segments, const env::EpisodeConfig& config, std::uint64_t seed);

struct TauRow {
  double tau = 1.0;
  trajectory::FeasibilityReport feasibility;
  bool extrapolated = false;  // outside the trained tau range
  bool skipped = false;
  Aggregate summary;
  std::size_t steps = 0;  // horizon of the time-scaled maneuver
};

std::vector<TauRow> tau_sweep(const Policy& policy, const std::vector<double>& taus,
                              const env::EpisodeConfig& config, std::size_t episodes, std::uint64_t seed,
                              bool force = false);

/// Header t_s,target_roll_deg,actual_roll_deg,...,action_throttle (13 columns).
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);
std::vector<TraceRow> read_trace_csv(std::istream& in);

/// Rewrites every traces/ep<k>.csv of a run directory into plot/ep<k>.csv.
/// Returns the files written; throws Error when the run has no traces.
std::vector<std::filesystem::path> export_run(const std::filesystem::path& run_dir);

/// Fields written to meta.txt.
struct RunMeta {
  std::string command;
  std::uint64_t seed = 0;
  std::string maneuver;
  int workers = 1;
  std::vector<std::pair<std::string, std::string>> extra;
};
void write_meta(const std::filesystem::path& run_dir, const RunMeta& meta);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace amrl::harness
