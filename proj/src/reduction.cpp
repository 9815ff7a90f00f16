#include "cocyclekit/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cocyclekit/parallel.hpp"

namespace cocyclekit {

PositiveMatrix solve_positive(const PositiveMatrix& q, const PositiveMatrix& r) {
  if (q.dim() != r.dim()) throw Error(ErrorKind::kDimensionMismatch, "solve_positive: Q and R differ in size");
  const Matrix q_half = q.power(0.5);
  const Matrix q_inv_half = q.power(-0.5);
  const PositiveMatrix middle(Matrix(q_half * r.matrix() * q_half));
  const Matrix middle_half = middle.power(0.5);
  return PositiveMatrix(Matrix(q_inv_half * middle_half * q_inv_half));
}

double invariance_residual(const Matrix& p, const Matrix& q, const Matrix& r) {
  return operator_norm(p.transpose() * q * p - r) / operator_norm(r);
}

namespace {

double min_eig(const Matrix& m) { return SymmetricMatrix(m).min_eigenvalue(); }

PointReduction reduce_point(const GramTriple& g, double epsilon, const ReductionTolerances& tol, std::uint64_t seed) {
  PointReduction pr{g.r.point, g.a, Matrix(), Matrix(), g.r, g.r_next, g.q, AlmostInvariance{}};
  pr.almost_invariance = check_almost_invariance(g.r, g.q, epsilon);

  const PositiveMatrix p = solve_positive(g.q.gram, g.r.gram);
  pr.p = p.matrix();
  pr.p_min = p.min_eigenvalue();
  pr.p_max = p.max_eigenvalue();
  pr.a_tilde = g.a * pr.p;
  pr.residual = invariance_residual(pr.p, g.q.gram.matrix(), g.r.gram.matrix());
  pr.slack = pr.almost_invariance.slack / g.r.gram.min_eigenvalue();
  pr.perturbation = operator_norm(g.a - pr.a_tilde);

  const Matrix vs = uniform_matrix(g.a.rows(), static_cast<Eigen::Index>(tol.test_vectors), seed);
  for (Eigen::Index j = 0; j < vs.cols(); ++j) {
    const Vector v = vs.col(j);
    const double before = g.r.norm(v);
    const double after = g.r_next.norm(pr.a_tilde * v);
    pr.metric_error = std::max(pr.metric_error, std::abs(after - before) / before);
  }

  // Loewner chain leading from almost invariance to e^{-eps} < P < e^{eps}.
  const Matrix& qm = g.q.gram.matrix();
  const Matrix q_half = g.q.gram.power(0.5);
  const Matrix middle = q_half * g.r.gram.matrix() * q_half;
  const Matrix middle_half = PositiveMatrix(middle).power(0.5);
  const Matrix q2 = qm * qm;
  pr.chain_upper_margin = min_eig(std::exp(2.0 * epsilon) * q2 - middle);
  pr.chain_upper_sqrt_margin = min_eig(std::exp(epsilon) * qm - middle_half);
  pr.chain_lower_margin = min_eig(middle - std::exp(-2.0 * epsilon) * q2);
  pr.chain_lower_sqrt_margin = min_eig(middle_half - std::exp(-epsilon) * qm);
  pr.chain_slack = pr.almost_invariance.slack * g.q.gram.max_eigenvalue();
  return pr;
}

std::int64_t common_truncation(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                               std::span<const BasePoint> samples) {
  auto counts = parallel_map<std::int64_t>(samples.size(), [&](std::size_t i) {
    const auto a = gram_r(spec, dyn, cfg, samples[i]).truncation_used;
    const auto b = gram_r(spec, dyn, cfg, iterate(dyn, samples[i], 1)).truncation_used;
    return std::max(a, b);
  });
  return *std::max_element(counts.begin(), counts.end());
}

}  // namespace

ReductionResult reduce(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                       std::span<const BasePoint> samples, const ReduceOptions& options) {
  if (samples.empty()) throw Error(ErrorKind::kInvalidInput, "reduce needs at least one sample point");
  cfg.validate();
  ReductionResult out;
  out.epsilon = cfg.epsilon;
  out.tolerances = options.tolerances;

  NormConfig used = cfg;
  if (options.strict) {
    out.common_truncation = std::holds_alternative<FixedTruncation>(cfg.truncation)
                                ? std::get<FixedTruncation>(cfg.truncation).terms
                                : common_truncation(spec, dyn, cfg, samples);
    used.truncation = FixedTruncation{out.common_truncation};
  }

  out.points = parallel_map<PointReduction>(samples.size(), [&](std::size_t i) {
    return reduce_point(gram_triple(spec, dyn, used, samples[i]), cfg.epsilon, options.tolerances,
                        options.seed + 0x9e3779b97f4a7c15ULL * (i + 1));
  });

  const double eps = cfg.epsilon;
  auto& d = out.diagnostics;
  d.p_spectrum_min = std::numeric_limits<double>::infinity();
  d.p_spectrum_max = -std::numeric_limits<double>::infinity();
  d.almost_invariance_ok = d.p_spectrum_ok = d.perturbation_ok = d.proof_chain_ok = true;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    const auto& pr = out.points[i];
    const double a_norm = operator_norm(pr.a);
    d.max_a_norm = std::max(d.max_a_norm, a_norm);
    d.perturbation_size = std::max(d.perturbation_size, pr.perturbation);
    d.p_spectrum_min = std::min(d.p_spectrum_min, pr.p_min);
    d.p_spectrum_max = std::max(d.p_spectrum_max, pr.p_max);
    if (pr.residual > d.invariance_residual) {
      d.invariance_residual = pr.residual;
      d.worst_residual_index = i;
    }
    d.metric_error = std::max(d.metric_error, pr.metric_error);
    d.max_slack = std::max(d.max_slack, pr.slack);

    d.almost_invariance_ok = d.almost_invariance_ok && pr.almost_invariance.holds;
    const bool spectrum = pr.p_min > std::exp(-eps) * (1.0 - pr.slack) && pr.p_max < std::exp(eps) * (1.0 + pr.slack);
    d.p_spectrum_ok = d.p_spectrum_ok && spectrum;
    const double bound = (std::exp(eps) - 1.0) * a_norm + std::exp(eps) * pr.slack * a_norm;
    d.perturbation_ok = d.perturbation_ok && pr.perturbation <= bound;
    const double cs = -pr.chain_slack;
    d.proof_chain_ok = d.proof_chain_ok && pr.chain_upper_margin > cs && pr.chain_upper_sqrt_margin > cs &&
                       pr.chain_lower_margin > cs && pr.chain_lower_sqrt_margin > cs;
  }
  d.perturbation_bound = (std::exp(eps) - 1.0) * d.max_a_norm + std::exp(eps) * d.max_slack * d.max_a_norm;
  d.residual_ok = d.invariance_residual <= options.tolerances.invariance_residual;
  d.metric_ok = d.metric_error <= options.tolerances.metric_preservation;
  return out;
}

namespace {

ConjugatePoint conjugate_point(Matrix m) {
  ConjugatePoint c;
  const Vector s = singular_values(m);
  c.sv_max = s(0);
  c.sv_min = s(s.size() - 1);
  c.defect = orthogonality_defect(m);
  c.determinant = m.determinant();
  c.trace_gram = (m.transpose() * m).trace();
  c.matrix = std::move(m);
  return c;
}

}  // namespace

NearIsometryResult conjugate_near_isometry(const ReductionResult& result) {
  NearIsometryResult out;
  const double eps = result.epsilon;
  out.worst_sv_min = std::numeric_limits<double>::infinity();
  out.within_bounds = true;
  for (const auto& pr : result.points) {
    Matrix b = pr.r_next.gram.power(0.5) * pr.a * pr.r.gram.power(-0.5);
    auto c = conjugate_point(std::move(b));
    out.worst_sv_min = std::min(out.worst_sv_min, c.sv_min);
    out.worst_sv_max = std::max(out.worst_sv_max, c.sv_max);
    out.slack = std::max(out.slack, pr.slack);
    // s bounds the relative Loewner slack on B^T B; e^{eps} s covers it on singular values.
    const double s = std::exp(eps) * pr.slack;
    out.within_bounds = out.within_bounds && c.sv_min > std::exp(-eps) - s && c.sv_max < std::exp(eps) + s;
    out.points.push_back(std::move(c));
  }
  return out;
}

NearIsometryResult conjugate_near_isometry(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                                           std::span<const BasePoint> samples) {
  return conjugate_near_isometry(reduce(spec, dyn, cfg, samples));
}

IsometricConjugateResult isometric_conjugate(const ReductionResult& result) {
  IsometricConjugateResult out;
  double slack = 0.0;
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const auto& pr = result.points[i];
    Matrix u = pr.r_next.gram.power(0.5) * pr.a_tilde * pr.r.gram.power(-0.5);
    auto c = conjugate_point(std::move(u));
    if (c.defect > out.worst_defect || i == 0) {
      out.worst_defect = c.defect;
      out.worst_index = i;
    }
    slack = std::max(slack, pr.slack);
    out.points.push_back(std::move(c));
  }
  out.tolerance = result.tolerances.orthogonality_defect + slack;
  out.within_tolerance = out.worst_defect <= out.tolerance;
  return out;
}

PeriodicIsometry matrix_isometry_spectrum(const Matrix& m) {
  PeriodicIsometry out;
  Eigen::EigenSolver<Matrix> es(m, true);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const auto lambda = es.eigenvalues()(i);
    out.eigenvalues.push_back(lambda);
    out.max_modulus_error = std::max(out.max_modulus_error, std::abs(std::abs(lambda) - 1.0));
  }
  out.determinant_error = std::abs(std::abs(m.determinant()) - 1.0);
  const Eigen::MatrixXcd v = es.eigenvectors();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
  const auto& s = svd.singularValues();
  out.eigenvector_condition = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
  return out;
}

PeriodicIsometry periodic_isometry(const ReductionResult& result, const BaseDynamics& dyn) {
  const std::int64_t p = dyn.period();
  if (static_cast<std::int64_t>(result.points.size()) != p) {
    throw Error(ErrorKind::kBaseMismatch, "periodic_isometry: result must cover the whole orbit");
  }
  const auto d = result.points.front().a_tilde.rows();
  Matrix prod = Matrix::Identity(d, d);
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const auto& pr = result.points[i];
    const auto* o = std::get_if<OrbitPoint>(&pr.point);
    if (!o || o->index != static_cast<std::int64_t>(i)) {
      throw Error(ErrorKind::kBaseMismatch, "periodic_isometry: samples must be the orbit in index order");
    }
    prod = pr.a_tilde * prod;
  }
  return matrix_isometry_spectrum(prod);
}

}  // namespace cocyclekit
