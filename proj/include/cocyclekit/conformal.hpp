#pragma once

// Conformal perturbations: rescale A by a constant e^{-lambda} or by
// e^{-lambda(omega)} with lambda(omega) = (1/d) log|det A(omega)|, reduce the
// rescaled cocycle and scale the metric-preserving perturbation back.

#include <optional>
#include <string>
#include <vector>

#include "cocyclekit/reduction.hpp"

namespace cocyclekit {

enum class ConformalMode { kConstant, kFunction };

std::string_view to_string(ConformalMode mode);

/// (1/d) log|det A(omega)|.
double det_rescaling(const CocycleSpec& spec, const BasePoint& point);

/// e^{-lambda} A.
CocycleSpec rescale_constant(const CocycleSpec& spec, double lambda);
/// e^{-lambda(omega)} A(omega) with lambda from det_rescaling.
CocycleSpec rescale_by_determinant(const CocycleSpec& spec);

struct ConformalOptions {
  ReduceOptions reduce;
  /// Allowed |lambda+ - lambda-|; unset means 1e-3 when estimated and 1e-9 on periodic bases.
  std::optional<double> gap_tolerance;
  double conformality_tolerance = 1e-8;
  std::int64_t exponent_horizon = 1024;
  std::size_t exponent_samples = 32;
  /// Constant mode: exponents of A computed elsewhere, used instead of a fresh estimate.
  std::optional<ExponentReport> exponents;
};

struct ConformalResult {
  ConformalMode mode = ConformalMode::kConstant;
  /// Constant mode: the single factor; function mode: unused (0).
  double lambda = 0.0;
  /// lambda(omega) at every sample (constant mode repeats the constant).
  std::vector<double> lambda_values;
  /// Exponents of A (constant mode) or of the rescaled cocycle (function mode).
  std::optional<ExponentReport> exponents;
  double exponent_gap = 0.0;
  double gap_tolerance = 0.0;
  bool gap_ok = true;
  ReductionResult inner;
  std::vector<Matrix> a_tilde;
  double conformality_defect = 0.0;
  double conformality_tolerance = 0.0;
  bool conformal_ok = false;
  /// Function mode: max violation of log m(A) <= lambda <= log ||A||.
  double sandwich_violation = 0.0;
  /// Function mode on periodic bases: | orbit average of lambda - lambda+/- |.
  std::optional<double> birkhoff_error;
  std::vector<std::string> warnings;
};

ConformalResult conformalize_constant(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                                      std::span<const BasePoint> samples, const ConformalOptions& options = {});

ConformalResult conformalize_function(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                                      std::span<const BasePoint> samples, const ConformalOptions& options = {});

}  // namespace cocyclekit
