#include "support.hpp"

#include "cocyclekit/reduction.hpp"

using namespace cocyclekit;
using testing::max_abs_diff;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

const BaseDynamics kFixed(PeriodicOrbit{1});

NormConfig with_eps(double eps) {
  NormConfig c;
  c.epsilon = eps;
  return c;
}

}  // namespace

TEST_CASE("orthogonal cocycles are left unchanged") {
  const auto rot = CocycleSpec::scalar_times_rotation(2, TrigSum{}, TrigSum{0.7, {}, {}});
  const auto samples = sample_points(kFixed, 1, 0);
  const auto r = reduce(rot, kFixed, with_eps(0.5), samples);
  CHECK(max_abs_diff(r.points[0].p, Matrix::Identity(2, 2)) < 1e-12);
  CHECK(r.diagnostics.perturbation_size < 1e-12);
}

TEST_CASE("shear reduction meets every bound") {
  const auto shear = CocycleSpec::constant(mat2(1, 1, 0, 1));
  const auto samples = sample_points(kFixed, 1, 0);
  for (double eps : {0.5, 0.2}) {
    const auto r = reduce(shear, kFixed, with_eps(eps), samples);
    const auto& d = r.diagnostics;
    CHECK(d.almost_invariance_ok);
    CHECK(d.p_spectrum_ok);
    CHECK(d.residual_ok);
    CHECK(d.metric_ok);
    CHECK(d.perturbation_ok);
    CHECK(d.proof_chain_ok);
    const auto& p = r.points[0];
    CHECK(p.p_min > std::exp(-eps) * (1.0 - p.slack));
    CHECK(p.p_max < std::exp(eps) * (1.0 + p.slack));
    CHECK(d.perturbation_size <= (std::exp(eps) - 1.0) * operator_norm(p.a) + p.slack);
    CHECK(d.perturbation_size > 0.0);

    // Independent recomputation of A~ preserving the metric: A~^T R A~ = R at a fixed point.
    const Matrix rm = p.r.gram.matrix();
    CHECK((p.a_tilde.transpose() * rm * p.a_tilde - rm).norm() <= 1e-10 * rm.norm());
  }
}

TEST_CASE("conjugates are near-isometric and isometric") {
  const auto shear = CocycleSpec::constant(mat2(1, 1, 0, 1));
  const auto samples = sample_points(kFixed, 1, 0);
  const double eps = 0.2;
  const auto r = reduce(shear, kFixed, with_eps(eps), samples);
  const auto b = conjugate_near_isometry(r);
  CHECK(b.within_bounds);
  CHECK(b.worst_sv_min > std::exp(-eps) - b.slack * std::exp(eps));
  CHECK(b.worst_sv_max < std::exp(eps) + b.slack * std::exp(eps));
  const auto u = isometric_conjugate(r);
  CHECK(u.worst_defect <= 1e-8);
  // U = R^{1/2} A~ R^{-1/2} rebuilt independently.
  const Matrix rh = psd_sqrt(r.points[0].r.gram).matrix();
  const Matrix um = rh * r.points[0].a_tilde * rh.inverse();
  CHECK(orthogonality_defect(um) <= 1e-8);
}

TEST_CASE("shear A~ at a fixed point is similar to a rotation") {
  const auto shear = CocycleSpec::constant(mat2(1, 1, 0, 1));
  const auto r = reduce(shear, kFixed, with_eps(0.5), sample_points(kFixed, 1, 0));
  const auto spec = periodic_isometry(r, kFixed);
  CHECK(spec.max_modulus_error <= 1e-8);
  CHECK(spec.determinant_error <= 1e-8);
  CHECK(std::isfinite(spec.eigenvector_condition));
}

TEST_CASE("periodic orbit products of A~ are isometries") {
  // Unipotent orbit product: A(1) A(0) = [[1,2],[0,1]] conjugated.
  const Matrix c = mat2(1, 0.4, 0.2, 1);
  const std::vector<Matrix> ms = {c * mat2(1, 1, 0, 1), mat2(1, 1, 0, 1) * c.inverse()};
  const BaseDynamics dyn(PeriodicOrbit{2});
  const auto spec = CocycleSpec::per_orbit_point(ms);
  const auto r = reduce(spec, dyn, with_eps(0.3), sample_points(dyn, 2, 0));
  CHECK(r.diagnostics.residual_ok);
  const auto iso = periodic_isometry(r, dyn);
  CHECK(iso.max_modulus_error <= 1e-8);
  CHECK(iso.determinant_error <= 1e-8);
}

TEST_CASE("periodic isometry needs the whole orbit in order") {
  const BaseDynamics dyn(PeriodicOrbit{2});
  const auto spec = CocycleSpec::per_orbit_point({mat2(1, 1, 0, 1), mat2(1, 0, 1, 1)});
  const std::vector<BasePoint> one = {OrbitPoint{0, 2}};
  const auto r = reduce(spec, dyn, with_eps(0.5), one);
  CHECK_THROWS_AS(periodic_isometry(r, dyn), Error);
  const std::vector<BasePoint> swapped = {OrbitPoint{1, 2}, OrbitPoint{0, 2}};
  CHECK_THROWS_AS(periodic_isometry(reduce(spec, dyn, with_eps(0.5), swapped), dyn), Error);
}

TEST_CASE("quasi-periodic reduction preserves the Lyapunov metric along orbits") {
  // Conjugated rotation cocycle: product-bounded but far from orthogonal.
  const Matrix c = mat2(2, 1, 0, 1);
  const auto inner = CocycleSpec::scalar_times_rotation(2, TrigSum{}, TrigSum{0.3, {0.5}, {}});
  const auto spec = CocycleSpec::conjugated(c, inner);
  const auto dyn = BaseDynamics::golden_rotation();
  const auto samples = sample_points(dyn, 16, 3);
  const auto r = reduce(spec, dyn, with_eps(0.3), samples);
  CHECK(r.diagnostics.residual_ok);
  CHECK(r.diagnostics.metric_ok);
  CHECK(r.diagnostics.p_spectrum_ok);
  CHECK(r.diagnostics.perturbation_ok);
  CHECK(isometric_conjugate(r).within_tolerance);
}

TEST_CASE("perturbation shrinks with epsilon") {
  const auto shear = CocycleSpec::constant(mat2(1, 1, 0, 1));
  const auto samples = sample_points(kFixed, 1, 0);
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {0.5, 0.3, 0.2, 0.1}) {
    const double size = reduce(shear, kFixed, with_eps(eps), samples).diagnostics.perturbation_size;
    CHECK(size < previous);
    previous = size;
  }
}

TEST_CASE("strict mode uses one common truncation") {
  const auto spec = CocycleSpec::conjugated(mat2(2, 1, 0, 1), CocycleSpec::scalar_times_rotation(2, TrigSum{}, TrigSum{0.3, {0.5}, {}}));
  const auto dyn = BaseDynamics::golden_rotation();
  const auto samples = sample_points(dyn, 4, 1);
  ReduceOptions opts;
  opts.strict = true;
  const auto r = reduce(spec, dyn, with_eps(0.4), samples, opts);
  CHECK(r.common_truncation > 0);
  for (const auto& p : r.points) {
    CHECK(p.r.truncation_used == r.common_truncation);
    CHECK(p.r_next.truncation_used == r.common_truncation);
  }
}

TEST_CASE("reduce needs samples") {
  const auto shear = CocycleSpec::constant(mat2(1, 1, 0, 1));
  CHECK_THROWS_AS(reduce(shear, kFixed, with_eps(0.5), std::vector<BasePoint>{}), Error);
}
