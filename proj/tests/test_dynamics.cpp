#include "support.hpp"

#include "cocyclekit/dynamics.hpp"

using namespace cocyclekit;

TEST_CASE("golden rotation iterates agree with n * shift mod 1") {
  const auto dyn = BaseDynamics::golden_rotation();
  const BasePoint x0 = reference_point(dyn);
  // Oracle in long double arithmetic, independent of the fixed-point encoding.
  const long double phi = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  for (std::int64_t n : {1, 2, 17, 1000, 9999, -1, -250}) {
    const long double frac = std::fmod(static_cast<long double>(n) * phi, 1.0L);
    const double expected = static_cast<double>(frac < 0 ? frac + 1.0L : frac);
    CHECK(phase(iterate(dyn, x0, n)) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("torus iteration is exactly invertible") {
  const BaseDynamics dyn(TorusTranslation{{0.3, std::sqrt(2.0) - 1.0}, true});
  const auto samples = sample_points(dyn, 10, 5);
  for (const auto& x : samples) {
    const auto y = iterate(dyn, iterate(dyn, x, 12345), -12345);
    CHECK(point_key(y) == point_key(x));
    CHECK(point_key(iterate(dyn, iterate(dyn, x, 3), 4)) == point_key(iterate(dyn, x, 7)));
  }
}

TEST_CASE("periodic orbit wraps in both directions") {
  const BaseDynamics dyn(PeriodicOrbit{5});
  const BasePoint x = OrbitPoint{3, 5};
  CHECK(std::get<OrbitPoint>(iterate(dyn, x, 2)).index == 0);
  CHECK(std::get<OrbitPoint>(iterate(dyn, x, -4)).index == 4);
  CHECK(std::get<OrbitPoint>(iterate(dyn, x, 5 * 1000 + 1)).index == 4);
  CHECK(phase(x) == doctest::Approx(0.6));
  CHECK(sample_points(dyn, 100, 0).size() == 5);
  CHECK_THROWS_AS(iterate(dyn, OrbitPoint{0, 4}, 1), Error);
}

TEST_CASE("shift iterates read tails and exhaust finite windows") {
  FullShift s;
  s.alphabet = 3;
  s.point.center = {0, 1, 2};
  s.point.right_tail = {1, 0};
  const BaseDynamics dyn(s);
  const BasePoint x = reference_point(dyn);
  CHECK(std::get<ShiftPoint>(x).symbol() == 0);
  CHECK(std::get<ShiftPoint>(iterate(dyn, x, 2)).symbol() == 2);
  CHECK(std::get<ShiftPoint>(iterate(dyn, x, 3)).symbol() == 1);
  CHECK(std::get<ShiftPoint>(iterate(dyn, x, 4)).symbol() == 0);
  CHECK(std::get<ShiftPoint>(iterate(dyn, x, 1000)).symbol() == ((1000 - 3) % 2 == 0 ? 1 : 0));
  try {
    (void)iterate(dyn, x, -1);
    FAIL("expected window exhaustion");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kWindowExhausted);
  }
  CHECK_THROWS_AS(phase(x), Error);
  CHECK_FALSE(dyn.uniquely_ergodic());
  CHECK_FALSE(dyn.minimal());
}

TEST_CASE("left tails repeat toward minus infinity") {
  ShiftSequence seq;
  seq.left_tail = {0, 1, 1};
  seq.center = {2};
  // ... 0 1 1 0 1 1 | 2
  CHECK(seq.symbol(-1) == 1);
  CHECK(seq.symbol(-2) == 1);
  CHECK(seq.symbol(-3) == 0);
  CHECK(seq.symbol(-4) == 1);
  CHECK_FALSE(seq.known(1));
}

TEST_CASE("base flags") {
  CHECK(BaseDynamics::golden_rotation().uniquely_ergodic());
  CHECK(BaseDynamics(PeriodicOrbit{3}).minimal());
  CHECK_FALSE(BaseDynamics(TorusTranslation{{0.25}, false}).uniquely_ergodic());
  CHECK_THROWS_AS(BaseDynamics(PeriodicOrbit{0}), Error);
  CHECK_THROWS_AS(BaseDynamics::golden_rotation().period(), Error);
}

TEST_CASE("Birkhoff averages over the golden rotation converge to the space mean") {
  const auto dyn = BaseDynamics::golden_rotation();
  const auto f = [](const BasePoint& x) { return std::cos(2.0 * M_PI * phase(x)); };
  // Bounded-type rotation number: discrepancy O(log n / n).
  const double avg = birkhoff_average(dyn, f, reference_point(dyn), 10000);
  CHECK(std::abs(avg) < 1e-3);
  const auto g = [](const BasePoint& x) { return phase(x); };
  CHECK(birkhoff_average(dyn, g, reference_point(dyn), 10000) == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("sampling is deterministic in the seed") {
  const auto dyn = BaseDynamics::golden_rotation();
  const auto a = sample_points(dyn, 8, 42);
  const auto b = sample_points(dyn, 8, 42);
  const auto c = sample_points(dyn, 8, 43);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(point_key(a[i]) == point_key(b[i]));
  CHECK(point_key(a[0]) != point_key(c[0]));
  CHECK_THROWS_AS(sample_points(dyn, 0, 1), Error);
}

TEST_CASE("point keys distinguish kinds and describe is readable") {
  CHECK(point_key(OrbitPoint{0, 2}) != point_key(TorusPoint{{0}}));
  CHECK(describe(OrbitPoint{1, 3}).find('1') != std::string::npos);
  CHECK(TorusPoint::encode(1.25) == TorusPoint::encode(0.25));
  CHECK(TorusPoint::encode(-0.75) == TorusPoint::encode(0.25));
}
