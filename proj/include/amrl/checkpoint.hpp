#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "amrl/runconfig.hpp"
#include "amrl/sac.hpp"

namespace amrl::checkpoint {

inline constexpr std::string_view kMagic = "AMRL1";
inline constexpr std::uint64_t kFormatVersion = 1;

struct Checkpoint {
  std::string layout{env::kObservationLayout};
  std::string maneuver;  // label, e.g. "loop"
  sac::SacAgent agent;
  runconfig::RunConfig run;
  std::uint64_t train_seed = 0;
  std::uint64_t steps_done = 0;
  std::uint64_t metrics_cursor = 0;  // episodes already written to metrics.jsonl
};

/// Binary, little-endian. Written to a temporary file and renamed.
void save(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Validates magic, format version and observation layout; throws
/// CheckpointError naming the offending field.
Checkpoint load(const std::filesystem::path& path,
                std::string_view expected_layout = env::kObservationLayout);

void write(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read(std::istream& in, std::string_view expected_layout = env::kObservationLayout);

/// Writes bytes to path via a sibling temporary file and rename.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

}  // namespace amrl::checkpoint
