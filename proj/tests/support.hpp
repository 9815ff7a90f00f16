#pragma once

#include <doctest.h>

#include <cmath>
#include <random>

#include "cocyclekit/linalg.hpp"

namespace testing {

using cocyclekit::Matrix;

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

/// Well-conditioned symmetric positive definite: G G^T + shift I.
inline Matrix random_spd(std::mt19937_64& rng, int d, double shift = 0.1) {
  const Matrix g = random_matrix(rng, d, d);
  return g * g.transpose() + shift * Matrix::Identity(d, d);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

/// Oracle-only dense eigen-free min eigenvalue check via Cholesky: true iff m > 0.
inline bool cholesky_positive(const Matrix& m) {
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  return llt.info() == Eigen::Success;
}

}  // namespace testing
