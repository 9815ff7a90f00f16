#pragma once

// Command execution behind the CLI and the Python module: runs a pipeline
// from an ExperimentConfig and assembles a deterministic JSON report with a
// pass/fail verdict per checked invariant.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cocyclekit/config.hpp"

namespace cocyclekit {

enum ExitCode : int { kExitOk = 0, kExitInvariantFailure = 1, kExitUsage = 2, kExitNumerical = 3 };

struct RunOptions {
  /// conformalize: constant | function; pipeline: uniquely-ergodic | minimal.
  std::string mode;
  bool strict = false;
};

struct RunOutput {
  Json report;
  /// Wall-clock seconds per stage; kept out of the report so reports stay reproducible.
  Json timings;
  /// (file name, contents) of CSV series.
  std::vector<std::pair<std::string, std::string>> csv;
  int exit_code = kExitOk;
};

/// Commands: exponents, reduce, conformalize, split, pipeline, sweep.
/// Throws ConfigError for usage problems; numerical errors are recorded in the report.
RunOutput run_command(std::string_view command, const ExperimentConfig& config, const RunOptions& options);

std::string report_text(const Json& report);

/// Writes via a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// report.json, timings.json and the CSV files under dir.
void write_outputs(const RunOutput& out, const std::filesystem::path& dir);

}  // namespace cocyclekit
