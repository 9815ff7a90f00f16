#include "support.hpp"

#include "cocyclekit/reduction.hpp"

using namespace cocyclekit;
using testing::max_abs_diff;

TEST_CASE("psd_sqrt matches the 2x2 closed form") {
  // sqrt(M) = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M)) for 2x2 SPD M.
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = testing::random_spd(rng, 2);
    const double s = std::sqrt(m.determinant());
    const Matrix expected = (m + s * Matrix::Identity(2, 2)) / std::sqrt(m.trace() + 2.0 * s);
    CHECK(max_abs_diff(psd_sqrt(PositiveMatrix(m)).matrix(), expected) < 1e-12 * (1.0 + expected.norm()));
  }
}

TEST_CASE("psd_sqrt squares back and commutes") {
  std::mt19937_64 rng(2);
  for (int d = 1; d <= 6; ++d) {
    const Matrix p = testing::random_spd(rng, d);
    const Matrix s = psd_sqrt(PositiveMatrix(p)).matrix();
    CHECK((s * s - p).norm() <= 1e-12 * p.norm());
    CHECK((s * p - p * s).norm() <= 1e-12 * p.norm());
    CHECK(testing::cholesky_positive(s));
    const Matrix si = psd_inverse_sqrt(PositiveMatrix(p)).matrix();
    CHECK((si * s - Matrix::Identity(d, d)).norm() < 1e-10);
  }
}

TEST_CASE("positive matrices reject indefinite and asymmetric input") {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  CHECK_THROWS_AS(PositiveMatrix{m}, Error);
  m << 1, 1, 0, 1;
  CHECK_THROWS_AS(SymmetricMatrix{m}, Error);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(require_finite(bad, "test"), Error);
}

TEST_CASE("Loewner order of diagonal matrices is entrywise") {
  Matrix b = Vector::LinSpaced(3, 1.0, 3.0).asDiagonal();
  Matrix c = Vector::LinSpaced(3, 1.5, 3.5).asDiagonal();
  const auto r = loewner_less(SymmetricMatrix(b), SymmetricMatrix(c));
  CHECK(r.less);
  CHECK(r.margin == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_FALSE(loewner_less(SymmetricMatrix(c), SymmetricMatrix(b)).less);
}

TEST_CASE("square root is operator monotone on random ordered pairs") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 5;
    const Matrix b = testing::random_spd(rng, d);
    const Matrix c = b + testing::random_spd(rng, d, 1e-3);
    const Matrix sb = psd_sqrt(PositiveMatrix(b)).matrix();
    const Matrix sc = psd_sqrt(PositiveMatrix(c)).matrix();
    CHECK(testing::cholesky_positive(sc - sb));
  }
}

TEST_CASE("squaring is not operator monotone") {
  // Standard counterexample: B < C but B^2 is not below C^2.
  Matrix b(2, 2), c(2, 2);
  b << 1, 1, 1, 1;
  c << 2, 1, 1, 1;
  b += 1e-3 * Matrix::Identity(2, 2);
  c += 2e-3 * Matrix::Identity(2, 2);
  CHECK(testing::cholesky_positive(c - b));
  CHECK_FALSE(testing::cholesky_positive(c * c - b * b));
}

TEST_CASE("norms and singular values of explicit matrices") {
  Matrix shear(2, 2);
  shear << 1, 1, 0, 1;
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  CHECK(operator_norm(shear) == doctest::Approx(golden).epsilon(1e-14));
  CHECK(mininorm(shear) == doctest::Approx(1.0 / golden).epsilon(1e-14));
  const Vector s = singular_values(Matrix(Vector::LinSpaced(3, 3.0, 1.0).asDiagonal()));
  CHECK(s(0) == 3.0);
  CHECK(s(2) == 1.0);
}

TEST_CASE("orthogonality defect and principal angles") {
  Matrix r(2, 2);
  const double t = 0.4;
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  CHECK(orthogonality_defect(r) < 1e-15);
  CHECK(orthogonality_defect(2.0 * r) == doctest::Approx(3.0));

  Matrix e1(2, 1), v(2, 1);
  e1 << 1, 0;
  v << std::cos(t), std::sin(t);
  CHECK(max_principal_angle(e1, v) == doctest::Approx(t).epsilon(1e-13));
  CHECK(max_principal_angle(e1, 5.0 * e1) < 1e-15);
  // Column spans, not columns, are compared.
  Matrix a(3, 2), b(3, 2);
  a << 1, 0, 0, 1, 0, 0;
  b << 1, 1, 1, -1, 0, 0;
  CHECK(max_principal_angle(a, b) < 1e-14);
  const Matrix q = orthonormalize(b);
  CHECK((q.transpose() * q - Matrix::Identity(2, 2)).norm() < 1e-14);
  CHECK_THROWS_AS(orthogonality_defect(q), Error);
}

TEST_CASE("log determinant carries the sign") {
  Matrix m(2, 2);
  m << 0, 2, 3, 0;
  const auto ld = log_determinant(m);
  CHECK(ld.sign == -1);
  CHECK(ld.log_abs == doctest::Approx(std::log(6.0)).epsilon(1e-15));
  CHECK(log_determinant(Matrix::Zero(2, 2)).sign == 0);
}

TEST_CASE("uniform_matrix is seeded and bounded") {
  const Matrix a = uniform_matrix(3, 4, 9);
  CHECK(a == uniform_matrix(3, 4, 9));
  CHECK(a != uniform_matrix(3, 4, 10));
  CHECK(a.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("solve_positive on commuting pairs is the entrywise ratio") {
  // Diagonal Q, R: P = diag(sqrt(r_i / q_i)).
  Matrix q = Vector::LinSpaced(3, 1.0, 4.0).asDiagonal();
  Matrix r = Vector::LinSpaced(3, 9.0, 2.0).asDiagonal();
  const Matrix p = solve_positive(PositiveMatrix(q), PositiveMatrix(r)).matrix();
  for (int i = 0; i < 3; ++i) CHECK(p(i, i) == doctest::Approx(std::sqrt(r(i, i) / q(i, i))).epsilon(1e-14));
  CHECK(std::abs(p(0, 1)) < 1e-15);
}

TEST_CASE("solve_positive satisfies the invariance equation and is unique") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 5;
    const Matrix q = testing::random_spd(rng, d);
    const Matrix r = testing::random_spd(rng, d);
    const Matrix p = solve_positive(PositiveMatrix(q), PositiveMatrix(r)).matrix();
    CHECK(invariance_residual(p, q, r) <= 1e-10);
    CHECK(testing::cholesky_positive(p));
    // Any other solution O P with O orthogonal in the Q metric is not symmetric positive unless O = I;
    // uniqueness via the symmetric square root: (Q^{1/2} P Q^{1/2})^2 = Q^{1/2} R Q^{1/2}.
    const Matrix qh = psd_sqrt(PositiveMatrix(q)).matrix();
    const Matrix lhs = qh * p * qh;
    CHECK((lhs * lhs - qh * r * qh).norm() <= 1e-9 * (qh * r * qh).norm());
  }
}

TEST_CASE("solve_positive rejects mismatched sizes") {
  CHECK_THROWS_AS(solve_positive(PositiveMatrix(Matrix::Identity(2, 2)), PositiveMatrix(Matrix::Identity(3, 3))),
                  Error);
}
