#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cocyclekit {

enum class ErrorKind {
  kInvalidInput,
  kDimensionMismatch,
  kNearSingular,
  kDegenerateGenerator,
  kWindowExhausted,
  kSeriesDivergence,
  kIncreaseHorizon,
  kAdaptedMetricFailure,
  kBaseMismatch,
};

std::string_view to_string(ErrorKind kind);

/// Numerical or contract failure raised by the library. `value` carries the
/// offending quantity when there is one (an eigenvalue, a determinant, an
/// angle), otherwise zero.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, double value = 0.0)
      : std::runtime_error(what), kind_(kind), value_(value) {}

  ErrorKind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }

 private:
  ErrorKind kind_;
  double value_;
};

}  // namespace cocyclekit
