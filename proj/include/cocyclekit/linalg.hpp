#pragma once

// Dense symmetric / positive-definite matrix analysis on small fibers.

#include <cstdint>

#include <Eigen/Dense>

#include "cocyclekit/error.hpp"

namespace cocyclekit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative asymmetry tolerated before symmetrization.
inline constexpr double kSymmetryTolerance = 1e-10;
/// Positivity requires min eigenvalue > kPositivityThreshold * max eigenvalue.
inline constexpr double kPositivityThreshold = 1e-12;

/// A real symmetric matrix. Construction symmetrizes (M + M^T) / 2 and
/// rejects inputs whose asymmetry exceeds kSymmetryTolerance * ||M||.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(const Matrix& m);

  const Matrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  /// Ascending eigenvalues.
  Vector eigenvalues() const;
  double min_eigenvalue() const;

 private:
  Matrix m_;
};

/// A symmetric positive-definite matrix with its eigendecomposition cached.
class PositiveMatrix {
 public:
  explicit PositiveMatrix(const SymmetricMatrix& s);
  explicit PositiveMatrix(const Matrix& m) : PositiveMatrix(SymmetricMatrix(m)) {}

  const Matrix& matrix() const { return sym_.matrix(); }
  const SymmetricMatrix& symmetric() const { return sym_; }
  Eigen::Index dim() const { return sym_.dim(); }

  double min_eigenvalue() const { return eigenvalues_(0); }
  double max_eigenvalue() const { return eigenvalues_(eigenvalues_.size() - 1); }
  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }

  /// V diag(lambda^exponent) V^T.
  Matrix power(double exponent) const;
  double log_determinant() const;

 private:
  SymmetricMatrix sym_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
};

struct LoewnerResult {
  bool less = false;
  /// Min eigenvalue of C - B; positive iff B < C.
  double margin = 0.0;

  explicit operator bool() const { return less; }
};

double operator_norm(const Matrix& m);
double mininorm(const Matrix& m);
/// Descending.
Vector singular_values(const Matrix& m);

/// Unique positive square root through the symmetric eigendecomposition.
PositiveMatrix psd_sqrt(const PositiveMatrix& p);
PositiveMatrix psd_inverse_sqrt(const PositiveMatrix& p);

/// B < C iff C - B is positive definite.
LoewnerResult loewner_less(const SymmetricMatrix& b, const SymmetricMatrix& c);

/// ||M^T M - I||, zero iff M is orthogonal.
double orthogonality_defect(const Matrix& m);

/// Largest principal angle (radians) between the column spans of two
/// full-column-rank matrices of equal rank.
double max_principal_angle(const Matrix& a, const Matrix& b);

/// Orthonormal basis of the column span (thin QR).
Matrix orthonormalize(const Matrix& a);

/// log|det M| and sign from one LU factorization.
struct LogDet {
  double log_abs = 0.0;
  int sign = 0;
};
LogDet log_determinant(const Matrix& m);

void require_finite(const Matrix& m, const char* what);

/// Entries uniform in [-1, 1) from a seeded mt19937_64; reproducible across platforms.
Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

}  // namespace cocyclekit
