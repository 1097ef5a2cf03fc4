#pragma once

/// Parameter sweeps: a directory of wall-touch profiles, one CSV/JSON pair
/// per (B, S) couple, plus `index.json` listing the couples and their status.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hbfill/io.hpp"
#include "hbfill/rheology.hpp"
#include "hbfill/solver.hpp"
#include "hbfill/surrogate.hpp"

namespace hbfill {

struct DatasetSpec {
  GridDescriptor grid;
  double B_min = kDefaultDomain.B_min;
  double B_max = kDefaultDomain.B_max;
  double S_min = kDefaultDomain.S_min;
  double S_max = kDefaultDomain.S_max;
  double n = 1.0;
  SolverConfig solver;

  /// Throws DomainError on empty grids, inverted ranges or ranges outside
  /// the global domain.
  void validate() const;

  static DatasetSpec regular(std::size_t nB, std::size_t nS, double n, const SolverConfig& solver);
  static DatasetSpec random(std::size_t count, std::uint64_t seed, double n, const SolverConfig& solver);
};

/// Couples in canonical order. Regular grids are B-major with both axes
/// linearly spaced including the endpoints; random grids draw B and S
/// independently and uniformly from a 64-bit Mersenne Twister.
std::vector<RheoParams> dataset_couples(const DatasetSpec& spec);

/// Relative run time heuristic: slow runs have large B and small S.
double predicted_cost(const RheoParams& p);

struct CoupleRecord {
  std::size_t id = 0;
  RheoParams params;
  std::string file;  ///< stem relative to the dataset directory
  bool ok = false;
  std::string error;
  double wall_touch_time = 0.0;
  std::uint64_t steps = 0;
};

struct DatasetIndex {
  static constexpr int kFormatVersion = 1;
  DatasetSpec spec;
  std::vector<CoupleRecord> couples;

  std::size_t failures() const;
};

struct TaskTiming {
  std::size_t id = 0;
  double seconds = 0.0;
  bool resumed = false;  ///< skipped because a finished profile was on disk
};

struct DatasetProgress {
  std::size_t done = 0;
  std::size_t total = 0;
  const CoupleRecord* record = nullptr;
  double seconds = 0.0;
  double eta_seconds = 0.0;  ///< from cost heuristic scaled by completed runs
};

struct DatasetRunResult {
  DatasetIndex index;
  std::vector<TaskTiming> timings;  ///< in id order
};

/// Solves every couple not already on disk, longest predicted first, on
/// `workers` threads. Output files do not depend on the worker count or on
/// whether the run was resumed.
DatasetRunResult generate_dataset(const DatasetSpec& spec, const std::filesystem::path& dir, std::size_t workers,
                                  const std::function<void(const DatasetProgress&)>& progress = {});

Json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const Json& j);

void write_index(const DatasetIndex& index, const std::filesystem::path& dir);
DatasetIndex read_index(const std::filesystem::path& dir);

/// Loads every profile listed in the index. Throws FormatError if any
/// couple failed or a file is missing.
TrainingSet load_dataset(const std::filesystem::path& dir);

}  // namespace hbfill
