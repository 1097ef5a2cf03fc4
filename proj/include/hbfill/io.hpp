#pragma once

/// File formats: profile CSV (`x,h`) with a JSON sidecar, observation
/// loading with resampling onto a surrogate grid, and JSON helpers that
/// write numbers as round-trip decimal strings.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hbfill/solver.hpp"

namespace hbfill {

using Json = nlohmann::json;

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
/// Accepts a JSON number or a decimal string.
double parse_double(const Json& j);

Json to_json(const SolverConfig& c);
SolverConfig solver_config_from_json(const Json& j);

Json to_json(const RheoParams& p);

struct ProfileSidecar {
  RheoParams params;
  std::size_t nx = 0;
  double wall_touch_time = 0.0;
  Provenance provenance = Provenance::pde;
  std::uint64_t steps = 0;
};

/// Writes `<stem>.csv` (header `x,h`) and `<stem>.json` for a profile on
/// the uniform grid of its length.
void write_profile(const HeightProfile& profile, const std::filesystem::path& stem, std::uint64_t steps = 0);

struct LoadedProfile {
  std::vector<double> x;
  std::vector<double> h;
  std::optional<ProfileSidecar> sidecar;
};

/// Reads a two-column `x,h` CSV (header optional) and, if present, the
/// matching `.json` sidecar. Accepts either the `.csv` path or the stem.
LoadedProfile read_profile(const std::filesystem::path& path);

/// Reads a profile sidecar JSON.
ProfileSidecar read_sidecar(const std::filesystem::path& path);

/// Linear interpolation of (x, h) onto the uniform nx-node grid on [0, 1].
/// x must be strictly increasing and span [0, 1] (within 1e-9).
std::vector<double> resample_uniform(std::span<const double> x, std::span<const double> h, std::size_t nx);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace hbfill
