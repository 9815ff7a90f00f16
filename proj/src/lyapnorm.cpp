#include "cocyclekit/lyapnorm.hpp"

#include <cmath>
#include <sstream>

namespace cocyclekit {

void NormConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorKind::kInvalidInput, "norm.epsilon must be a positive finite number");
  }
  if (const auto* f = std::get_if<FixedTruncation>(&truncation)) {
    if (f->terms < 1) throw Error(ErrorKind::kInvalidInput, "fixed truncation needs N >= 1");
  } else {
    const double tau = std::get<AdaptiveTruncation>(truncation).tau;
    if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::kInvalidInput, "adaptive tau must lie in (0, 1)");
  }
  if (max_terms < 1 || divergence_window < 1) throw Error(ErrorKind::kInvalidInput, "norm guards must be >= 1");
}

double MetricSample::norm(const Vector& v) const { return std::sqrt(v.dot(gram.matrix() * v)); }

namespace {

[[noreturn]] void diverged(const BasePoint& point, double epsilon, std::int64_t n, double shell) {
  std::ostringstream os;
  os << "Lyapunov series does not converge at " << describe(point) << " with epsilon = " << epsilon
     << " (shell norm " << shell << " at n = " << n << "); try a larger epsilon";
  throw Error(ErrorKind::kSeriesDivergence, os.str(), shell);
}

}  // namespace

MetricSample gram_r(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg, const BasePoint& point) {
  cfg.validate();
  const int d = spec.dim();
  const auto* fixed = std::get_if<FixedTruncation>(&cfg.truncation);
  const std::int64_t limit = fixed ? std::min(fixed->terms, cfg.max_terms) : cfg.max_terms;
  const double tau = fixed ? 0.0 : std::get<AdaptiveTruncation>(cfg.truncation).tau;

  Matrix sum = Matrix::Identity(d, d);
  ProductWalker fwd(spec, dyn, point, 1);
  ProductWalker bwd(spec, dyn, point, -1);
  double previous_shell = 0.0;
  std::int64_t rising = 0;
  double shell = 0.0;
  std::int64_t n = 0;
  while (n < limit) {
    fwd.step();
    bwd.step();
    ++n;
    const double decay = cfg.epsilon * static_cast<double>(n);
    // Unit Frobenius norm makes ||M^T M|| <= 1, so each weight bounds its term's norm.
    const double wf = std::exp(2.0 * (fwd.log_scale() - decay));
    const double wb = std::exp(2.0 * (bwd.log_scale() - decay));
    shell = wf + wb;
    if (!std::isfinite(shell)) diverged(point, cfg.epsilon, n, shell);
    sum.noalias() += wf * (fwd.matrix().transpose() * fwd.matrix());
    sum.noalias() += wb * (bwd.matrix().transpose() * bwd.matrix());

    rising = (n > 1 && shell >= previous_shell) ? rising + 1 : 0;
    previous_shell = shell;
    if (rising >= cfg.divergence_window) diverged(point, cfg.epsilon, n, shell);

    if (!fixed) {
      // min eig <= trace / d, so the eigen solve is only needed near the threshold.
      if (shell <= tau * sum.trace() / d && shell <= tau * SymmetricMatrix(sum).min_eigenvalue()) break;
      if (n == limit) diverged(point, cfg.epsilon, n, shell);
    }
  }
  return MetricSample{point, PositiveMatrix(sum), n, shell};
}

GramTriple gram_triple(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                       const BasePoint& point) {
  Matrix a = evaluate(spec, point);
  MetricSample r = gram_r(spec, dyn, cfg, point);
  MetricSample r_next = gram_r(spec, dyn, cfg, iterate(dyn, point, 1));
  const double a_norm = operator_norm(a);
  MetricSample q{point, PositiveMatrix(Matrix(a.transpose() * r_next.gram.matrix() * a)), r_next.truncation_used,
                 a_norm * a_norm * r_next.tail_bound};
  return GramTriple{std::move(a), std::move(r), std::move(r_next), std::move(q)};
}

MetricSample gram_q(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg, const BasePoint& point) {
  return gram_triple(spec, dyn, cfg, point).q;
}

AlmostInvariance check_almost_invariance(const MetricSample& r, const MetricSample& q, double epsilon) {
  if (r.gram.dim() != q.gram.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "check_almost_invariance: Gram matrices of different size");
  }
  const double down = std::exp(-2.0 * epsilon);
  const double up = std::exp(2.0 * epsilon);
  AlmostInvariance out;
  out.lower_margin = loewner_less(SymmetricMatrix(down * r.gram.matrix()), q.gram.symmetric()).margin;
  out.upper_margin = loewner_less(q.gram.symmetric(), SymmetricMatrix(up * r.gram.matrix())).margin;
  out.slack = up * r.tail_bound + q.tail_bound;
  out.holds_strictly = out.lower_margin > 0.0 && out.upper_margin > 0.0;
  out.holds = out.lower_margin > -out.slack && out.upper_margin > -out.slack;
  return out;
}

}  // namespace cocyclekit
