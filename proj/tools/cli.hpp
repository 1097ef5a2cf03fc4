#pragma once

#include <string>
#include <vector>

#include "hbfill/io.hpp"

namespace hbfill::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kNumerical = 2,
  kThreshold = 3,
};

/// Resolved settings for a named profile ("desk" or "production").
Json profile_defaults(const std::string& name);

/// Parses and runs one command line; returns the process exit code.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace hbfill::cli
