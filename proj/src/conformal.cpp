#include "cocyclekit/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cocyclekit {

std::string_view to_string(ConformalMode mode) { return mode == ConformalMode::kConstant ? "constant" : "function"; }

double det_rescaling(const CocycleSpec& spec, const BasePoint& point) {
  return log_determinant(evaluate(spec, point)).log_abs / static_cast<double>(spec.dim());
}

CocycleSpec rescale_constant(const CocycleSpec& spec, double lambda) {
  return CocycleSpec::scaled([lambda](const BasePoint&) { return -lambda; }, spec);
}

CocycleSpec rescale_by_determinant(const CocycleSpec& spec) {
  return CocycleSpec::scaled([spec](const BasePoint& x) { return -det_rescaling(spec, x); }, spec);
}

namespace {

double default_gap_tolerance(const BaseDynamics& dyn) { return dyn.is_periodic() ? 1e-9 : 1e-3; }

/// Max over points and seeded test vectors of | |||A~ v|||_{F w} - e^{lambda(w)} |||v|||_w | / |||v|||_w.
double conformality_defect(const ReductionResult& inner, const std::vector<Matrix>& a_tilde,
                           const std::vector<double>& lambda, std::uint64_t seed, std::size_t count) {
  double worst = 0.0;
  for (std::size_t i = 0; i < inner.points.size(); ++i) {
    const auto& pr = inner.points[i];
    const Matrix vs = uniform_matrix(pr.a.rows(), static_cast<Eigen::Index>(count), seed ^ (0xc2b2ae3d27d4eb4fULL * (i + 1)));
    for (Eigen::Index j = 0; j < vs.cols(); ++j) {
      const Vector v = vs.col(j);
      const double before = pr.r.norm(v);
      const double after = pr.r_next.norm(a_tilde[i] * v);
      worst = std::max(worst, std::abs(after - std::exp(lambda[i]) * before) / before);
    }
  }
  return worst;
}

void finish(ConformalResult& out, const ConformalOptions& options) {
  out.a_tilde.reserve(out.inner.points.size());
  for (std::size_t i = 0; i < out.inner.points.size(); ++i) {
    out.a_tilde.push_back(std::exp(out.lambda_values[i]) * out.inner.points[i].a_tilde);
  }
  out.conformality_tolerance = options.conformality_tolerance;
  out.conformality_defect = conformality_defect(out.inner, out.a_tilde, out.lambda_values, options.reduce.seed,
                                                options.reduce.tolerances.test_vectors);
  out.conformal_ok = out.conformality_defect <= out.conformality_tolerance;
}

}  // namespace

ConformalResult conformalize_constant(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                                      std::span<const BasePoint> samples, const ConformalOptions& options) {
  ConformalResult out;
  out.mode = ConformalMode::kConstant;
  out.gap_tolerance = options.gap_tolerance.value_or(default_gap_tolerance(dyn));
  out.exponents = options.exponents ? *options.exponents
                                    : estimate_exponents(spec, dyn, options.exponent_horizon,
                                                         options.exponent_samples, options.reduce.seed);
  const auto& e = *out.exponents;
  const double plus = e.exact ? e.exact->lambda_plus : e.lambda_plus_est;
  const double minus = e.exact ? e.exact->lambda_minus : e.lambda_minus_est;
  out.lambda = 0.5 * (plus + minus);
  out.exponent_gap = plus - minus;
  out.gap_ok = out.exponent_gap <= out.gap_tolerance;
  if (!out.gap_ok) {
    std::ostringstream os;
    os << "lambda+ - lambda- = " << out.exponent_gap << " exceeds the gap tolerance " << out.gap_tolerance
       << "; proceeding with lambda = " << out.lambda;
    out.warnings.push_back(os.str());
  }
  out.inner = reduce(rescale_constant(spec, out.lambda), dyn, cfg, samples, options.reduce);
  out.lambda_values.assign(samples.size(), out.lambda);
  finish(out, options);
  return out;
}

ConformalResult conformalize_function(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                                      std::span<const BasePoint> samples, const ConformalOptions& options) {
  ConformalResult out;
  out.mode = ConformalMode::kFunction;
  out.gap_tolerance = options.gap_tolerance.value_or(default_gap_tolerance(dyn));

  for (const auto& x : samples) {
    const Matrix a = evaluate(spec, x);
    const double lambda = log_determinant(a).log_abs / static_cast<double>(spec.dim());
    const Vector s = singular_values(a);
    const double slack = 1e-12 * std::max(1.0, std::abs(lambda));
    out.sandwich_violation = std::max({out.sandwich_violation, std::log(s(s.size() - 1)) - lambda - slack,
                                       lambda - std::log(s(0)) - slack});
    out.lambda_values.push_back(lambda);
  }

  const CocycleSpec rescaled = rescale_by_determinant(spec);
  out.exponents = estimate_exponents(rescaled, dyn, options.exponent_horizon, options.exponent_samples,
                                     options.reduce.seed);
  const auto& e = *out.exponents;
  const double plus = e.exact ? e.exact->lambda_plus : e.lambda_plus_est;
  const double minus = e.exact ? e.exact->lambda_minus : e.lambda_minus_est;
  out.exponent_gap = std::max(std::abs(plus), std::abs(minus));
  out.gap_ok = out.exponent_gap <= out.gap_tolerance;
  if (!out.gap_ok) {
    std::ostringstream os;
    os << "the determinant-rescaled cocycle has exponents (" << minus << ", " << plus
       << "), not within the gap tolerance " << out.gap_tolerance << " of 0";
    out.warnings.push_back(os.str());
  }

  if (dyn.is_periodic()) {
    const auto whole = periodic_exponents(spec, dyn);
    const std::int64_t p = dyn.period();
    double sum = 0.0;
    for (std::int64_t j = 0; j < p; ++j) sum += det_rescaling(spec, OrbitPoint{j, p});
    const double avg = sum / static_cast<double>(p);
    out.birkhoff_error = std::max(std::abs(avg - whole.lambda_plus), std::abs(avg - whole.lambda_minus));
  }

  out.inner = reduce(rescaled, dyn, cfg, samples, options.reduce);
  finish(out, options);
  return out;
}

}  // namespace cocyclekit
