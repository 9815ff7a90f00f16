#include "cocyclekit/cocycle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "cocyclekit/parallel.hpp"

namespace cocyclekit {

double TrigSum::operator()(double x) const {
  double v = constant;
  const double w = 2.0 * std::numbers::pi * x;
  for (std::size_t k = 0; k < cos.size(); ++k) v += cos[k] * std::cos(static_cast<double>(k + 1) * w);
  for (std::size_t k = 0; k < sin.size(); ++k) v += sin[k] * std::sin(static_cast<double>(k + 1) * w);
  return v;
}

Matrix rotation(double angle) {
  Matrix r(2, 2);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  r << c, -s, s, c;
  return r;
}

namespace {

void require_square_invertible(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorKind::kInvalidInput, std::string(what) + ": matrices must be square");
  }
  require_finite(m, what);
}

int common_dim(const std::vector<Matrix>& ms, const char* what) {
  if (ms.empty()) throw Error(ErrorKind::kInvalidInput, std::string(what) + ": no matrices given");
  for (const auto& m : ms) {
    require_square_invertible(m, what);
    if (m.rows() != ms.front().rows()) {
      throw Error(ErrorKind::kDimensionMismatch, std::string(what) + ": matrices of different sizes");
    }
  }
  return static_cast<int>(ms.front().rows());
}

Matrix evaluate_unchecked(const CocycleSpec& spec, const BasePoint& point);

struct Evaluator {
  const BasePoint& point;
  int dim;

  Matrix operator()(const ConstantGenerator& g) const { return g.matrix; }

  Matrix operator()(const PerOrbitPointGenerator& g) const {
    const auto* o = std::get_if<OrbitPoint>(&point);
    if (!o) throw Error(ErrorKind::kBaseMismatch, "per-orbit-point generator needs a periodic base");
    if (static_cast<std::int64_t>(g.matrices.size()) != o->period) {
      throw Error(ErrorKind::kBaseMismatch, "per-orbit-point generator: matrix count differs from the period");
    }
    return g.matrices[static_cast<std::size_t>(o->index)];
  }

  Matrix operator()(const SchrodingerGenerator& g) const {
    const double v = 2.0 * g.coupling * std::cos(2.0 * std::numbers::pi * phase(point));
    Matrix m(2, 2);
    m << g.energy - v, -1.0, 1.0, 0.0;
    return m;
  }

  Matrix operator()(const ScalarRotationGenerator& g) const {
    const double x = phase(point);
    const double scale = std::exp(g.log_scale(x));
    if (g.dim == 1) return Matrix::Constant(1, 1, scale);
    return scale * rotation(g.angle(x));
  }

  Matrix operator()(const PerSymbolGenerator& g) const {
    const auto* s = std::get_if<ShiftPoint>(&point);
    if (!s) throw Error(ErrorKind::kBaseMismatch, "per-symbol generator needs a shift base");
    const int a = s->symbol();
    if (a < 0 || static_cast<std::size_t>(a) >= g.matrices.size()) {
      throw Error(ErrorKind::kInvalidInput, "per-symbol generator: symbol has no matrix");
    }
    return g.matrices[static_cast<std::size_t>(a)];
  }

  Matrix operator()(const BlockDiagonalGenerator& g) const {
    Matrix m = Matrix::Zero(dim, dim);
    Eigen::Index at = 0;
    for (const auto& b : g.blocks) {
      m.block(at, at, b.dim(), b.dim()) = evaluate_unchecked(b, point);
      at += b.dim();
    }
    return m;
  }

  Matrix operator()(const ScaledGenerator& g) const {
    return std::exp(g.log_factor(point)) * evaluate_unchecked(g.inner, point);
  }

  Matrix operator()(const ConjugatedGenerator& g) const {
    return g.conjugator * evaluate_unchecked(g.inner, point) * g.conjugator_inverse;
  }

  Matrix operator()(const CustomGenerator& g) const { return g.fn(point); }
};

Matrix evaluate_unchecked(const CocycleSpec& spec, const BasePoint& point) {
  if (!spec.valid()) throw Error(ErrorKind::kInvalidInput, "empty cocycle spec");
  return std::visit(Evaluator{point, spec.dim()}, spec.generator().kind);
}

}  // namespace

CocycleSpec CocycleSpec::constant(const Matrix& m) {
  require_square_invertible(m, "constant generator");
  return CocycleSpec(static_cast<int>(m.rows()), std::make_shared<const Generator>(Generator{ConstantGenerator{m}}));
}

CocycleSpec CocycleSpec::per_orbit_point(std::vector<Matrix> matrices) {
  const int d = common_dim(matrices, "per-orbit-point generator");
  return CocycleSpec(d, std::make_shared<const Generator>(Generator{PerOrbitPointGenerator{std::move(matrices)}}));
}

CocycleSpec CocycleSpec::schrodinger(double energy, double coupling) {
  if (!std::isfinite(energy) || !std::isfinite(coupling)) {
    throw Error(ErrorKind::kInvalidInput, "schrodinger generator: non-finite parameters");
  }
  return CocycleSpec(2, std::make_shared<const Generator>(Generator{SchrodingerGenerator{energy, coupling}}));
}

CocycleSpec CocycleSpec::scalar_times_rotation(int dim, TrigSum log_scale, TrigSum angle) {
  if (dim != 1 && dim != 2) throw Error(ErrorKind::kInvalidInput, "scalar-times-rotation supports dim 1 or 2");
  return CocycleSpec(dim, std::make_shared<const Generator>(
                              Generator{ScalarRotationGenerator{dim, std::move(log_scale), std::move(angle)}}));
}

CocycleSpec CocycleSpec::per_symbol(std::vector<Matrix> matrices) {
  const int d = common_dim(matrices, "per-symbol generator");
  return CocycleSpec(d, std::make_shared<const Generator>(Generator{PerSymbolGenerator{std::move(matrices)}}));
}

CocycleSpec CocycleSpec::block_diagonal(std::vector<CocycleSpec> blocks) {
  if (blocks.empty()) throw Error(ErrorKind::kInvalidInput, "block-diagonal generator needs blocks");
  int d = 0;
  for (const auto& b : blocks) {
    if (!b.valid()) throw Error(ErrorKind::kInvalidInput, "block-diagonal generator: empty block");
    d += b.dim();
  }
  return CocycleSpec(d, std::make_shared<const Generator>(Generator{BlockDiagonalGenerator{std::move(blocks)}}));
}

CocycleSpec CocycleSpec::scaled(std::function<double(const BasePoint&)> log_factor, CocycleSpec inner) {
  if (!inner.valid()) throw Error(ErrorKind::kInvalidInput, "scaled generator: empty inner spec");
  const int d = inner.dim();
  return CocycleSpec(d, std::make_shared<const Generator>(
                            Generator{ScaledGenerator{std::move(log_factor), std::move(inner)}}));
}

CocycleSpec CocycleSpec::conjugated(const Matrix& conjugator, CocycleSpec inner) {
  require_square_invertible(conjugator, "conjugated generator");
  if (!inner.valid() || conjugator.rows() != inner.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "conjugated generator: conjugator size differs from inner dim");
  }
  Eigen::FullPivLU<Matrix> lu(conjugator);
  if (!lu.isInvertible()) throw Error(ErrorKind::kInvalidInput, "conjugated generator: singular conjugator");
  const int d = inner.dim();
  return CocycleSpec(d, std::make_shared<const Generator>(
                            Generator{ConjugatedGenerator{conjugator, lu.inverse(), std::move(inner)}}));
}

CocycleSpec CocycleSpec::custom(int dim, std::function<Matrix(const BasePoint&)> fn) {
  if (dim < 1) throw Error(ErrorKind::kInvalidInput, "custom generator needs dim >= 1");
  return CocycleSpec(dim, std::make_shared<const Generator>(Generator{CustomGenerator{std::move(fn)}}));
}

Matrix evaluate(const CocycleSpec& spec, const BasePoint& point) {
  Matrix m = evaluate_unchecked(spec, point);
  if (m.rows() != spec.dim() || m.cols() != spec.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "generator returned a matrix of the wrong size");
  }
  require_finite(m, "evaluate");
  const LogDet ld = log_determinant(m);
  if (ld.sign == 0 || ld.log_abs < std::log(kDeterminantThreshold)) {
    std::ostringstream os;
    os << "degenerate generator at " << describe(point) << ": |det| = " << std::exp(ld.log_abs);
    throw Error(ErrorKind::kDegenerateGenerator, os.str(), std::exp(ld.log_abs));
  }
  return m;
}

ScaledProduct ScaledProduct::identity(int dim) { return ScaledProduct{Matrix::Identity(dim, dim), 0.0}; }

ProductWalker::ProductWalker(const CocycleSpec& spec, const BaseDynamics& dyn, const BasePoint& start, int sign)
    : spec_(&spec), dyn_(&dyn), sign_(sign), m_(Matrix::Identity(spec.dim(), spec.dim())), x_(start) {
  if (sign != 1 && sign != -1) throw Error(ErrorKind::kInvalidInput, "ProductWalker: sign must be +1 or -1");
}

void ProductWalker::step() {
  if (sign_ > 0) {
    m_ = evaluate(*spec_, x_) * m_;
    x_ = iterate(*dyn_, x_, 1);
  } else {
    x_ = iterate(*dyn_, x_, -1);
    m_ = evaluate(*spec_, x_).partialPivLu().solve(m_);
  }
  const double f = m_.norm();
  m_ /= f;
  log_scale_ += std::log(f);
  ++k_;
}

void walk_products(const CocycleSpec& spec, const BaseDynamics& dyn, const BasePoint& point, std::int64_t steps,
                   int sign, const std::function<bool(std::int64_t, const Matrix&, double)>& visit) {
  ProductWalker w(spec, dyn, point, sign);
  while (w.k() < steps) {
    w.step();
    if (!visit(w.k(), w.matrix(), w.log_scale())) return;
  }
}

ScaledProduct product(const CocycleSpec& spec, const BaseDynamics& dyn, const BasePoint& point, std::int64_t n) {
  ScaledProduct out = ScaledProduct::identity(spec.dim());
  if (n == 0) return out;
  walk_products(spec, dyn, point, n > 0 ? n : -n, n > 0 ? 1 : -1, [&](std::int64_t, const Matrix& m, double ls) {
    out.matrix = m;
    out.log_scale = ls;
    return true;
  });
  const double s = operator_norm(out.matrix);
  out.matrix /= s;
  out.log_scale += std::log(s);
  return out;
}

std::vector<std::int64_t> doubling_schedule(std::int64_t n) {
  std::vector<std::int64_t> ks;
  for (std::int64_t k = 1; k < n; k *= 2) ks.push_back(k);
  if (n >= 1) ks.push_back(n);
  return ks;
}

PeriodicExponents periodic_exponents(const CocycleSpec& spec, const BaseDynamics& dyn) {
  const std::int64_t p = dyn.period();
  const ScaledProduct prod = product(spec, dyn, OrbitPoint{0, p}, p);
  Eigen::EigenSolver<Matrix> es(prod.matrix, false);
  std::vector<double> logs;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    logs.push_back((std::log(std::abs(es.eigenvalues()(i))) + prod.log_scale) / static_cast<double>(p));
  }
  std::sort(logs.rbegin(), logs.rend());
  return PeriodicExponents{logs.front(), logs.back(), logs};
}

ExponentReport estimate_exponents(const CocycleSpec& spec, const BaseDynamics& dyn, std::int64_t horizon,
                                  std::size_t samples, std::uint64_t seed) {
  if (horizon < 2) throw Error(ErrorKind::kInvalidInput, "estimate_exponents needs horizon >= 2");
  if (samples < 1) throw Error(ErrorKind::kInvalidInput, "estimate_exponents needs samples >= 1");
  const auto points = sample_points(dyn, samples, seed);
  const auto ks = doubling_schedule(horizon);

  // Per sample: log ||A^k|| and log ||A^{-k}|| at each scheduled k.
  using Row = std::pair<std::vector<double>, std::vector<double>>;
  auto rows = parallel_map<Row>(points.size(), [&](std::size_t i) {
    Row r{std::vector<double>(ks.size()), std::vector<double>(ks.size())};
    for (int sign : {1, -1}) {
      auto& dest = sign > 0 ? r.first : r.second;
      std::size_t next = 0;
      walk_products(spec, dyn, points[i], horizon, sign, [&](std::int64_t k, const Matrix& m, double ls) {
        if (k == ks[next]) dest[next++] = ls + std::log(operator_norm(m));
        return next < ks.size();
      });
    }
    return r;
  });

  ExponentReport rep;
  rep.horizon = horizon;
  rep.sample_count = points.size();
  rep.seed = seed;
  rep.lambda_plus_upper = std::numeric_limits<double>::infinity();
  rep.lambda_minus_lower = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < ks.size(); ++j) {
    HorizonRow h{ks[j], -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& r : rows) {
      h.max_log_norm = std::max(h.max_log_norm, r.first[j]);
      h.max_log_inverse_norm = std::max(h.max_log_inverse_norm, r.second[j]);
    }
    const auto k = static_cast<double>(ks[j]);
    rep.lambda_plus_upper = std::min(rep.lambda_plus_upper, h.max_log_norm / k);
    rep.lambda_minus_lower = std::max(rep.lambda_minus_lower, -h.max_log_inverse_norm / k);
    rep.schedule.push_back(h);
  }
  const auto n = static_cast<double>(horizon);
  rep.lambda_plus_est = rep.schedule.back().max_log_norm / n;
  rep.lambda_minus_est = -rep.schedule.back().max_log_inverse_norm / n;
  if (dyn.is_periodic()) {
    rep.exact = periodic_exponents(spec, dyn);
    rep.lambda_plus_est = rep.exact->lambda_plus;
    rep.lambda_minus_est = rep.exact->lambda_minus;
  }
  return rep;
}

ProductBounds product_bounded_diagnostic(const CocycleSpec& spec, const BaseDynamics& dyn, std::int64_t horizon,
                                         std::size_t samples, std::uint64_t seed) {
  if (horizon < 1) throw Error(ErrorKind::kInvalidInput, "product_bounded_diagnostic needs horizon >= 1");
  const auto points = sample_points(dyn, samples, seed);
  auto per_point = parallel_map<ProductBounds>(points.size(), [&](std::size_t i) {
    ProductBounds b{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (int sign : {1, -1}) {
      walk_products(spec, dyn, points[i], horizon, sign, [&](std::int64_t, const Matrix& m, double ls) {
        const Vector s = singular_values(m);
        b.log_sup_norm = std::max(b.log_sup_norm, ls + std::log(s(0)));
        b.log_inf_mininorm = std::min(b.log_inf_mininorm, ls + std::log(s(s.size() - 1)));
        return true;
      });
    }
    return b;
  });
  ProductBounds out = per_point.front();
  for (const auto& b : per_point) {
    out.log_sup_norm = std::max(out.log_sup_norm, b.log_sup_norm);
    out.log_inf_mininorm = std::min(out.log_inf_mininorm, b.log_inf_mininorm);
  }
  return out;
}

}  // namespace cocyclekit
