#pragma once

// Invertible base dynamics F: torus translations, periodic orbits and the
// full shift, with exact forward/backward iteration.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace cocyclekit {

/// A point of T^k. Coordinates are 64-bit fixed point (value = raw / 2^64),
/// so translation mod 1 is exact wrap-around integer addition.
struct TorusPoint {
  std::vector<std::uint64_t> raw;

  double coordinate(std::size_t i) const;
  static std::uint64_t encode(double x);  // x taken mod 1
};

struct OrbitPoint {
  std::int64_t index = 0;
  std::int64_t period = 1;
};

/// A bi-infinite symbol sequence: ... left_tail left_tail | center | right_tail right_tail ...
/// Position 0 of the sequence is center[0]. An empty tail means the sequence
/// is unknown past the center on that side.
struct ShiftSequence {
  std::vector<int> left_tail;
  std::vector<int> center;
  std::vector<int> right_tail;

  bool known(std::int64_t position) const;
  int symbol(std::int64_t position) const;  // throws window-exhausted
};

struct ShiftPoint {
  std::shared_ptr<const ShiftSequence> sequence;
  /// Sequence position of the current 0-th coordinate.
  std::int64_t offset = 0;

  int symbol(std::int64_t j = 0) const { return sequence->symbol(offset + j); }
};

using BasePoint = std::variant<TorusPoint, OrbitPoint, ShiftPoint>;

/// Scalar phase used by trigonometric generators: the first torus
/// coordinate, or index / period on a periodic orbit. Throws for shifts.
double phase(const BasePoint& point);

/// Exact identity key (used for memo tables).
std::vector<std::uint64_t> point_key(const BasePoint& point);

struct PointKeyHash {
  std::size_t operator()(const std::vector<std::uint64_t>& key) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ key.size();
    for (const std::uint64_t w : key) {
      h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 0xbf58476d1ce4e5b9ULL;
    }
    return static_cast<std::size_t>(h ^ (h >> 31));
  }
};

std::string describe(const BasePoint& point);

struct TorusTranslation {
  std::vector<double> shift;
  bool irrational = true;
};

struct PeriodicOrbit {
  std::int64_t period = 1;
};

struct FullShift {
  int alphabet = 2;
  /// The distinguished point; sample windows reuse its tails.
  ShiftSequence point;
  /// Origin of the distinguished point inside its center word.
  std::int64_t origin = 0;
  /// Half-width of randomly sampled center words.
  std::int64_t sample_radius = 16;
};

class BaseDynamics {
 public:
  using Kind = std::variant<TorusTranslation, PeriodicOrbit, FullShift>;

  explicit BaseDynamics(Kind kind);

  static BaseDynamics golden_rotation();

  const Kind& kind() const { return kind_; }
  bool uniquely_ergodic() const;
  bool minimal() const;
  bool is_periodic() const { return std::holds_alternative<PeriodicOrbit>(kind_); }
  std::int64_t period() const;  // throws unless periodic

  const std::vector<std::uint64_t>& torus_shift_raw() const { return shift_raw_; }

 private:
  Kind kind_;
  std::vector<std::uint64_t> shift_raw_;
};

/// The golden mean (sqrt(5) - 1) / 2.
inline constexpr double kGoldenShift = 0.6180339887498948482;

/// F^n(point). Throws window-exhausted when a shift point leaves its known window.
BasePoint iterate(const BaseDynamics& dyn, const BasePoint& point, std::int64_t n);

/// Deterministic sample: seeded uniform points on the torus, the whole orbit
/// for periodic bases (count ignored), random center windows for the shift.
std::vector<BasePoint> sample_points(const BaseDynamics& dyn, std::size_t count, std::uint64_t seed);

/// The distinguished starting point (origin of the torus, index 0, the configured shift point).
BasePoint reference_point(const BaseDynamics& dyn);

double birkhoff_average(const BaseDynamics& dyn, const std::function<double(const BasePoint&)>& f,
                        const BasePoint& start, std::int64_t n);

/// Portable uniform double in [0, 1) from a 64-bit word.
inline double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace cocyclekit
