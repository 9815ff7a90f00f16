#pragma once

// Truncated Lyapunov inner products
//   <<u, v>>_omega = sum_{|n| <= N} e^{-2 eps |n|} <A^n(omega) u, A^n(omega) v>
// as Gram matrices R(omega), their pushforward Q(omega) = A^T R(F omega) A,
// and the almost-invariance sandwich e^{-2 eps} R < Q < e^{2 eps} R.

#include <cstdint>
#include <variant>

#include "cocyclekit/cocycle.hpp"

namespace cocyclekit {

struct FixedTruncation {
  std::int64_t terms = 20;
};

/// Stop at the first N whose shell (the +-N terms) has norm <= tau times the
/// min eigenvalue of the partial sum.
struct AdaptiveTruncation {
  double tau = 1e-8;
};

struct NormConfig {
  double epsilon = 0.5;
  std::variant<FixedTruncation, AdaptiveTruncation> truncation = AdaptiveTruncation{};
  /// Hard cap on N regardless of policy.
  std::int64_t max_terms = 100000;
  /// Consecutive non-decreasing shell norms that count as divergence.
  std::int64_t divergence_window = 50;

  void validate() const;
};

struct MetricSample {
  BasePoint point;
  PositiveMatrix gram;
  std::int64_t truncation_used = 0;
  /// Norm bound of the last summed shell; a heuristic proxy for the omitted tail.
  double tail_bound = 0.0;

  double norm(const Vector& v) const;
};

MetricSample gram_r(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg, const BasePoint& point);

/// Q(omega) = A(omega)^T R(F omega) A(omega). The returned tail bound is the
/// R(F omega) tail pushed through A: ||A||^2 * tail.
MetricSample gram_q(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg, const BasePoint& point);

/// Everything reduce needs at one base point, computed once.
struct GramTriple {
  Matrix a;
  MetricSample r;
  MetricSample r_next;
  MetricSample q;
};
GramTriple gram_triple(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                       const BasePoint& point);

struct AlmostInvariance {
  /// Both Loewner inequalities hold up to `slack`.
  bool holds = false;
  /// Both hold with no slack at all.
  bool holds_strictly = false;
  /// min eig(Q - e^{-2 eps} R).
  double lower_margin = 0.0;
  /// min eig(e^{2 eps} R - Q).
  double upper_margin = 0.0;
  /// e^{2 eps} * tail(R) + tail(Q).
  double slack = 0.0;
};

AlmostInvariance check_almost_invariance(const MetricSample& r, const MetricSample& q, double epsilon);

}  // namespace cocyclekit
