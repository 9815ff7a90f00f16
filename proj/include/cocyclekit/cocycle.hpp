#pragma once

// Matrix cocycle generators over a base dynamics, scaled orbit products and
// uniform exponent estimates.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "cocyclekit/dynamics.hpp"
#include "cocyclekit/linalg.hpp"

namespace cocyclekit {

/// c + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x).
struct TrigSum {
  double constant = 0.0;
  std::vector<double> cos;
  std::vector<double> sin;

  double operator()(double x) const;
};

/// Determinant threshold below which a generated matrix is rejected.
inline constexpr double kDeterminantThreshold = 1e-12;

struct Generator;

/// A generator family omega -> A(omega) of invertible d x d matrices.
class CocycleSpec {
 public:
  CocycleSpec() = default;

  static CocycleSpec constant(const Matrix& m);
  static CocycleSpec per_orbit_point(std::vector<Matrix> matrices);
  /// [[E - v, -1], [1, 0]] with v(omega) = 2 kappa cos(2 pi omega).
  static CocycleSpec schrodinger(double energy, double coupling);
  /// exp(log_scale(omega)) * rotation(angle(omega)); dim 1 ignores the angle.
  static CocycleSpec scalar_times_rotation(int dim, TrigSum log_scale, TrigSum angle);
  static CocycleSpec per_symbol(std::vector<Matrix> matrices);
  static CocycleSpec block_diagonal(std::vector<CocycleSpec> blocks);
  /// exp(log_factor(omega)) * inner(omega).
  static CocycleSpec scaled(std::function<double(const BasePoint&)> log_factor, CocycleSpec inner);
  /// M * inner(omega) * M^{-1} for a constant invertible M.
  static CocycleSpec conjugated(const Matrix& conjugator, CocycleSpec inner);
  static CocycleSpec custom(int dim, std::function<Matrix(const BasePoint&)> fn);

  int dim() const { return dim_; }
  const Generator& generator() const { return *gen_; }
  bool valid() const { return static_cast<bool>(gen_); }

 private:
  CocycleSpec(int dim, std::shared_ptr<const Generator> gen) : dim_(dim), gen_(std::move(gen)) {}

  int dim_ = 0;
  std::shared_ptr<const Generator> gen_;
};

struct ConstantGenerator {
  Matrix matrix;
};
struct PerOrbitPointGenerator {
  std::vector<Matrix> matrices;
};
struct SchrodingerGenerator {
  double energy = 0.0;
  double coupling = 0.0;
};
struct ScalarRotationGenerator {
  int dim = 2;
  TrigSum log_scale;
  TrigSum angle;
};
struct PerSymbolGenerator {
  std::vector<Matrix> matrices;
};
struct BlockDiagonalGenerator {
  std::vector<CocycleSpec> blocks;
};
struct ScaledGenerator {
  std::function<double(const BasePoint&)> log_factor;
  CocycleSpec inner;
};
struct ConjugatedGenerator {
  Matrix conjugator;
  Matrix conjugator_inverse;
  CocycleSpec inner;
};
struct CustomGenerator {
  std::function<Matrix(const BasePoint&)> fn;
};

struct Generator {
  std::variant<ConstantGenerator, PerOrbitPointGenerator, SchrodingerGenerator, ScalarRotationGenerator,
               PerSymbolGenerator, BlockDiagonalGenerator, ScaledGenerator, ConjugatedGenerator, CustomGenerator>
      kind;
};

Matrix rotation(double angle);

/// A(omega); throws degenerate-generator when |det| < kDeterminantThreshold.
Matrix evaluate(const CocycleSpec& spec, const BasePoint& point);

/// exp(log_scale) * matrix with operator_norm(matrix) == 1.
struct ScaledProduct {
  Matrix matrix;
  double log_scale = 0.0;

  Matrix value() const { return std::exp(log_scale) * matrix; }
  double log_norm() const { return log_scale; }
  static ScaledProduct identity(int dim);
};

/// A^n(omega) for any integer n; A^0 = I, A^{-n}(omega) = (A^n(F^{-n} omega))^{-1}.
ScaledProduct product(const CocycleSpec& spec, const BaseDynamics& dyn, const BasePoint& point, std::int64_t n);

/// Incremental A^k(omega) for k = 0, 1, 2, ... in one direction (sign +1 or
/// -1). The held matrix is renormalized to unit Frobenius norm after every
/// step; the represented product is exp(log_scale) * matrix.
class ProductWalker {
 public:
  ProductWalker(const CocycleSpec& spec, const BaseDynamics& dyn, const BasePoint& start, int sign);

  void step();
  std::int64_t k() const { return k_; }
  const Matrix& matrix() const { return m_; }
  double log_scale() const { return log_scale_; }
  /// F^{sign * k}(start).
  const BasePoint& point() const { return x_; }

 private:
  const CocycleSpec* spec_;
  const BaseDynamics* dyn_;
  int sign_;
  std::int64_t k_ = 0;
  Matrix m_;
  double log_scale_ = 0.0;
  BasePoint x_;
};

/// Walks A^k(omega) for k = 1..steps in one direction (sign +1 or -1),
/// calling visit(k, matrix, log_scale) with matrix renormalized to unit
/// Frobenius norm. Returning false from visit stops the walk.
void walk_products(const CocycleSpec& spec, const BaseDynamics& dyn, const BasePoint& point, std::int64_t steps,
                   int sign, const std::function<bool(std::int64_t, const Matrix&, double)>& visit);

struct HorizonRow {
  std::int64_t k = 0;
  /// max over samples of log ||A^k||.
  double max_log_norm = 0.0;
  /// max over samples of log ||A^{-k}||, i.e. -min log m(A^k) over F^k samples.
  double max_log_inverse_norm = 0.0;
};

struct PeriodicExponents {
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;
  /// log|eigenvalue| / p of A^p at the orbit start, descending.
  std::vector<double> log_moduli;
};

struct ExponentReport {
  double lambda_plus_upper = 0.0;
  double lambda_plus_est = 0.0;
  double lambda_minus_lower = 0.0;
  double lambda_minus_est = 0.0;
  std::int64_t horizon = 0;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;
  std::vector<HorizonRow> schedule;
  std::optional<PeriodicExponents> exact;
};

/// Doubling schedule 1, 2, 4, ... capped by and ending at n.
std::vector<std::int64_t> doubling_schedule(std::int64_t n);

/// Exact per-orbit exponents from the eigenvalues of A^p.
PeriodicExponents periodic_exponents(const CocycleSpec& spec, const BaseDynamics& dyn);

ExponentReport estimate_exponents(const CocycleSpec& spec, const BaseDynamics& dyn, std::int64_t horizon,
                                  std::size_t samples, std::uint64_t seed);

struct ProductBounds {
  double log_sup_norm = 0.0;
  double log_inf_mininorm = 0.0;

  double sup_norm() const { return std::exp(log_sup_norm); }
  double inf_mininorm() const { return std::exp(log_inf_mininorm); }
};

/// max ||A^k|| and min m(A^k) over samples and 1 <= |k| <= horizon.
ProductBounds product_bounded_diagnostic(const CocycleSpec& spec, const BaseDynamics& dyn, std::int64_t horizon,
                                         std::size_t samples, std::uint64_t seed);

}  // namespace cocyclekit
