#include "cocyclekit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace cocyclekit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kNearSingular: return "near-singular";
    case ErrorKind::kDegenerateGenerator: return "degenerate-generator";
    case ErrorKind::kWindowExhausted: return "window-exhausted";
    case ErrorKind::kSeriesDivergence: return "series-divergence";
    case ErrorKind::kIncreaseHorizon: return "increase-horizon";
    case ErrorKind::kAdaptedMetricFailure: return "adapted-metric-failure";
    case ErrorKind::kBaseMismatch: return "base-mismatch";
  }
  return "unknown";
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::kInvalidInput, std::string(what) + ": non-finite entries");
  }
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
    }
  }
  return m;
}

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << what << ": expected a nonempty square matrix, got " << m.rows() << "x" << m.cols();
    throw Error(ErrorKind::kInvalidInput, os.str());
  }
}

}  // namespace

Vector singular_values(const Matrix& m) {
  require_finite(m, "singular_values");
  if (m.size() == 0) return Vector();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues();
}

double operator_norm(const Matrix& m) {
  require_finite(m, "operator_norm");
  if (m.size() == 0) return 0.0;
  return singular_values(m)(0);
}

double mininorm(const Matrix& m) {
  require_finite(m, "mininorm");
  require_square(m, "mininorm");
  Vector s = singular_values(m);
  return s(s.size() - 1);
}

SymmetricMatrix::SymmetricMatrix(const Matrix& m) {
  require_square(m, "SymmetricMatrix");
  require_finite(m, "SymmetricMatrix");
  const double asym = operator_norm(m - m.transpose());
  const double scale = operator_norm(m);
  if (asym > kSymmetryTolerance * scale) {
    std::ostringstream os;
    os << "SymmetricMatrix: asymmetry " << asym << " exceeds " << kSymmetryTolerance << " * " << scale;
    throw Error(ErrorKind::kInvalidInput, os.str(), asym);
  }
  m_ = 0.5 * (m + m.transpose());
}

Vector SymmetricMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double SymmetricMatrix::min_eigenvalue() const { return eigenvalues()(0); }

PositiveMatrix::PositiveMatrix(const SymmetricMatrix& s) : sym_(s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym_.matrix());
  eigenvalues_ = es.eigenvalues();
  eigenvectors_ = es.eigenvectors();
  const double lo = eigenvalues_(0);
  const double hi = eigenvalues_(eigenvalues_.size() - 1);
  if (!(hi > 0.0) || !(lo > kPositivityThreshold * hi)) {
    std::ostringstream os;
    os << "PositiveMatrix: min eigenvalue " << lo << " below " << kPositivityThreshold
       << " * max eigenvalue " << hi;
    throw Error(ErrorKind::kNearSingular, os.str(), lo);
  }
}

Matrix PositiveMatrix::power(double exponent) const {
  Vector scaled = eigenvalues_.array().pow(exponent).matrix();
  return eigenvectors_ * scaled.asDiagonal() * eigenvectors_.transpose();
}

double PositiveMatrix::log_determinant() const { return eigenvalues_.array().log().sum(); }

PositiveMatrix psd_sqrt(const PositiveMatrix& p) { return PositiveMatrix(p.power(0.5)); }

PositiveMatrix psd_inverse_sqrt(const PositiveMatrix& p) { return PositiveMatrix(p.power(-0.5)); }

LoewnerResult loewner_less(const SymmetricMatrix& b, const SymmetricMatrix& c) {
  if (b.dim() != c.dim()) {
    std::ostringstream os;
    os << "loewner_less: dimensions " << b.dim() << " and " << c.dim() << " differ";
    throw Error(ErrorKind::kDimensionMismatch, os.str());
  }
  const double margin = SymmetricMatrix(c.matrix() - b.matrix()).min_eigenvalue();
  return LoewnerResult{margin > 0.0, margin};
}

double orthogonality_defect(const Matrix& m) {
  require_finite(m, "orthogonality_defect");
  require_square(m, "orthogonality_defect");
  const Matrix g = m.transpose() * m - Matrix::Identity(m.rows(), m.cols());
  return operator_norm(g);
}

Matrix orthonormalize(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

double max_principal_angle(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "max_principal_angle: subspaces of different shape");
  }
  const Matrix qa = orthonormalize(a);
  const Matrix qb = orthonormalize(b);
  // sin of the largest angle is the norm of the component of span(a) orthogonal to span(b).
  const Matrix residual = qa - qb * (qb.transpose() * qa);
  return std::asin(std::min(1.0, operator_norm(residual)));
}

LogDet log_determinant(const Matrix& m) {
  require_square(m, "log_determinant");
  Eigen::PartialPivLU<Matrix> lu(m);
  const Matrix& packed = lu.matrixLU();
  LogDet out{0.0, static_cast<int>(lu.permutationP().determinant())};
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    const double u = packed(i, i);
    if (u == 0.0) return LogDet{-std::numeric_limits<double>::infinity(), 0};
    if (u < 0.0) out.sign = -out.sign;
    out.log_abs += std::log(std::abs(u));
  }
  return out;
}

}  // namespace cocyclekit
