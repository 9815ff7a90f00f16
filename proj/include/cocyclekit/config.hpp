#pragma once

// Experiment configuration: JSON text validated against the published
// schema, with every default written back into a normalized echo.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cocyclekit/splitting.hpp"

namespace cocyclekit {

using Json = nlohmann::ordered_json;

/// Invalid configuration; the message names the line or the field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SamplingConfig {
  std::size_t count = 64;
  std::uint64_t seed = 0;
  /// Orbit horizon for exponent estimates and product bounds.
  std::int64_t horizon = 512;
  std::size_t exponent_samples = 32;
  std::vector<std::int64_t> gap_horizons = {1, 2, 4, 8, 16, 32, 64};
  std::optional<std::int64_t> bundle_horizon;
};

struct ToleranceConfig {
  ReductionTolerances reduction;
  double conformality = 1e-8;
  /// Eigenvalue moduli and |det| of orbit products of A~.
  double spectrum = 1e-8;
  double angle = 1e-6;
  double frame = 1e-10;
  double determinant = 1e-8;
  /// lambda+ - lambda- allowed for conformalization; resolved from the base when not given.
  double gap = 1e-3;
  /// Slack for lambda- <= lambda+ and the periodic Fekete bounds.
  double exponent_order = 1e-12;
};

struct SplittingConfig {
  double slope_threshold = 0.02;
  std::optional<std::vector<int>> forced_partition;
};

struct SweepConfig {
  std::string param;
  std::vector<double> values;
};

struct ExperimentConfig {
  BaseDynamics dynamics = BaseDynamics::golden_rotation();
  CocycleSpec cocycle;
  NormConfig norm;
  SamplingConfig sampling;
  ToleranceConfig tolerances;
  SplittingConfig splitting;
  std::optional<SweepConfig> sweep;
  std::optional<std::string> output_dir;
  bool full = false;
  /// Normalized configuration with all defaults filled in.
  Json echo;

  void set_seed(std::uint64_t seed);
  void set_full(bool full);
  void set_sweep(SweepConfig sweep);
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace cocyclekit
