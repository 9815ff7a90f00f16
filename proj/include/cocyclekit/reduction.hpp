#pragma once

// Metric-preserving perturbation A~ = A P, where P is the unique positive
// solution of P^T Q P = R, plus the near-isometric conjugate
// B = R(F w)^{1/2} A R(w)^{-1/2} and the isometric conjugate
// U = R(F w)^{1/2} A~ R(w)^{-1/2}.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "cocyclekit/lyapnorm.hpp"

namespace cocyclekit {

/// P = Q^{-1/2} (Q^{1/2} R Q^{1/2})^{1/2} Q^{-1/2}.
PositiveMatrix solve_positive(const PositiveMatrix& q, const PositiveMatrix& r);

/// ||P^T Q P - R|| / ||R||.
double invariance_residual(const Matrix& p, const Matrix& q, const Matrix& r);

struct ReductionTolerances {
  double invariance_residual = 1e-10;
  double orthogonality_defect = 1e-8;
  /// Relative error allowed in |||A~ v|||_{F w} = |||v|||_w.
  double metric_preservation = 1e-9;
  std::size_t test_vectors = 8;
};

struct ReduceOptions {
  ReductionTolerances tolerances;
  /// Recompute every Gram matrix with one common fixed truncation.
  bool strict = false;
  /// Seeds the random test vectors.
  std::uint64_t seed = 0;
};

struct PointReduction {
  BasePoint point;
  Matrix a;
  Matrix p;
  Matrix a_tilde;
  MetricSample r;
  MetricSample r_next;
  MetricSample q;
  AlmostInvariance almost_invariance;
  double p_min = 0.0;
  double p_max = 0.0;
  double residual = 0.0;
  double metric_error = 0.0;
  /// Relative spectral slack s = almost_invariance.slack / min eig R.
  double slack = 0.0;
  double perturbation = 0.0;
  /// min eig margins of e^{2 eps} Q^2 - Q^{1/2} R Q^{1/2} and e^{eps} Q - (Q^{1/2} R Q^{1/2})^{1/2}.
  double chain_upper_margin = 0.0;
  double chain_upper_sqrt_margin = 0.0;
  /// ... and of Q^{1/2} R Q^{1/2} - e^{-2 eps} Q^2, (Q^{1/2} R Q^{1/2})^{1/2} - e^{-eps} Q.
  double chain_lower_margin = 0.0;
  double chain_lower_sqrt_margin = 0.0;
  double chain_slack = 0.0;
};

struct ReductionDiagnostics {
  double perturbation_size = 0.0;
  double perturbation_bound = 0.0;
  double max_a_norm = 0.0;
  double p_spectrum_min = 0.0;
  double p_spectrum_max = 0.0;
  double invariance_residual = 0.0;
  double metric_error = 0.0;
  double max_slack = 0.0;
  std::size_t worst_residual_index = 0;

  bool almost_invariance_ok = false;
  bool p_spectrum_ok = false;
  bool residual_ok = false;
  bool metric_ok = false;
  bool perturbation_ok = false;
  bool proof_chain_ok = false;
};

struct ReductionResult {
  double epsilon = 0.0;
  std::int64_t common_truncation = 0;  // nonzero in strict mode
  ReductionTolerances tolerances;
  std::vector<PointReduction> points;
  ReductionDiagnostics diagnostics;
};

ReductionResult reduce(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                       std::span<const BasePoint> samples, const ReduceOptions& options = {});

struct ConjugatePoint {
  Matrix matrix;
  double sv_min = 0.0;
  double sv_max = 0.0;
  double defect = 0.0;
  double determinant = 0.0;
  double trace_gram = 0.0;  // trace(M^T M)
};

struct NearIsometryResult {
  std::vector<ConjugatePoint> points;
  double worst_sv_min = 0.0;
  double worst_sv_max = 0.0;
  double slack = 0.0;
  bool within_bounds = false;
};

/// B(w) = R(F w)^{1/2} A(w) R(w)^{-1/2}; singular values in (e^{-eps} - s, e^{eps} + s).
NearIsometryResult conjugate_near_isometry(const ReductionResult& result);
NearIsometryResult conjugate_near_isometry(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                                           std::span<const BasePoint> samples);

struct IsometricConjugateResult {
  std::vector<ConjugatePoint> points;
  double worst_defect = 0.0;
  std::size_t worst_index = 0;
  double tolerance = 0.0;
  bool within_tolerance = false;
};

/// U(w) = R(F w)^{1/2} A~(w) R(w)^{-1/2}; orthogonality defect within the
/// configured tolerance plus the truncation slack.
IsometricConjugateResult isometric_conjugate(const ReductionResult& result);

/// Spectral data of an orbit product around a periodic orbit.
struct PeriodicIsometry {
  std::vector<std::complex<double>> eigenvalues;
  double max_modulus_error = 0.0;      // max | |lambda| - 1 |
  double determinant_error = 0.0;      // | |det| - 1 |
  double eigenvector_condition = 0.0;  // finite iff diagonalizable
};

/// Eigenvalue moduli of the product of A~ around the orbit (the base must be
/// periodic and the result must hold every orbit point in index order).
PeriodicIsometry periodic_isometry(const ReductionResult& result, const BaseDynamics& dyn);

PeriodicIsometry matrix_isometry_spectrum(const Matrix& m);

}  // namespace cocyclekit
