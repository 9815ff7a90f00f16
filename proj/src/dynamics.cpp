#include "cocyclekit/dynamics.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "cocyclekit/error.hpp"

namespace cocyclekit {

double TorusPoint::coordinate(std::size_t i) const { return unit_interval(raw.at(i)); }

std::uint64_t TorusPoint::encode(double x) {
  if (!std::isfinite(x)) throw Error(ErrorKind::kInvalidInput, "torus coordinate is not finite");
  const double frac = x - std::floor(x);
  const double scaled = std::ldexp(frac, 64);
  if (scaled >= 0x1.0p64) return 0;
  return static_cast<std::uint64_t>(scaled);
}

bool ShiftSequence::known(std::int64_t position) const {
  const auto len = static_cast<std::int64_t>(center.size());
  if (position >= 0 && position < len) return true;
  if (position >= len) return !right_tail.empty();
  return !left_tail.empty();
}

int ShiftSequence::symbol(std::int64_t position) const {
  const auto len = static_cast<std::int64_t>(center.size());
  if (position >= 0 && position < len) return center[static_cast<std::size_t>(position)];
  if (!known(position)) {
    std::ostringstream os;
    os << "shift window exhausted at sequence position " << position;
    throw Error(ErrorKind::kWindowExhausted, os.str(), static_cast<double>(position));
  }
  if (position >= len) {
    const auto period = static_cast<std::int64_t>(right_tail.size());
    return right_tail[static_cast<std::size_t>((position - len) % period)];
  }
  // ...www | center: position -1 is the last letter of the left tail word.
  const auto period = static_cast<std::int64_t>(left_tail.size());
  const std::int64_t k = (-position - 1) % period;
  return left_tail[static_cast<std::size_t>(period - 1 - k)];
}

double phase(const BasePoint& point) {
  if (const auto* t = std::get_if<TorusPoint>(&point)) return t->coordinate(0);
  if (const auto* o = std::get_if<OrbitPoint>(&point)) {
    return static_cast<double>(o->index) / static_cast<double>(o->period);
  }
  throw Error(ErrorKind::kBaseMismatch, "shift points have no phase; use a per-symbol generator");
}

std::vector<std::uint64_t> point_key(const BasePoint& point) {
  if (const auto* t = std::get_if<TorusPoint>(&point)) {
    std::vector<std::uint64_t> key{0};
    key.insert(key.end(), t->raw.begin(), t->raw.end());
    return key;
  }
  if (const auto* o = std::get_if<OrbitPoint>(&point)) {
    return {1, static_cast<std::uint64_t>(o->index), static_cast<std::uint64_t>(o->period)};
  }
  const auto& s = std::get<ShiftPoint>(point);
  return {2, static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(s.sequence.get())),
          static_cast<std::uint64_t>(s.offset)};
}

std::string describe(const BasePoint& point) {
  std::ostringstream os;
  os.precision(17);
  if (const auto* t = std::get_if<TorusPoint>(&point)) {
    os << "torus(";
    for (std::size_t i = 0; i < t->raw.size(); ++i) os << (i ? "," : "") << t->coordinate(i);
    os << ")";
  } else if (const auto* o = std::get_if<OrbitPoint>(&point)) {
    os << "orbit(" << o->index << "/" << o->period << ")";
  } else {
    const auto& s = std::get<ShiftPoint>(point);
    os << "shift(offset=" << s.offset << ",symbol=";
    if (s.sequence->known(s.offset)) os << s.symbol(); else os << "?";
    os << ")";
  }
  return os.str();
}

BaseDynamics::BaseDynamics(Kind kind) : kind_(std::move(kind)) {
  if (auto* t = std::get_if<TorusTranslation>(&kind_)) {
    if (t->shift.empty()) throw Error(ErrorKind::kInvalidInput, "torus translation needs at least one coordinate");
    for (double a : t->shift) shift_raw_.push_back(TorusPoint::encode(a));
  } else if (auto* p = std::get_if<PeriodicOrbit>(&kind_)) {
    if (p->period < 1) throw Error(ErrorKind::kInvalidInput, "periodic orbit needs period >= 1");
  } else {
    auto& s = std::get<FullShift>(kind_);
    if (s.alphabet < 1) throw Error(ErrorKind::kInvalidInput, "shift alphabet must be nonempty");
    if (s.point.center.empty()) throw Error(ErrorKind::kInvalidInput, "shift point needs a nonempty center word");
    if (s.origin < 0 || s.origin >= static_cast<std::int64_t>(s.point.center.size())) {
      throw Error(ErrorKind::kInvalidInput, "shift origin must index the center word");
    }
    auto check = [&](const std::vector<int>& w) {
      for (int a : w) {
        if (a < 0 || a >= s.alphabet) throw Error(ErrorKind::kInvalidInput, "shift symbol outside alphabet");
      }
    };
    check(s.point.left_tail);
    check(s.point.center);
    check(s.point.right_tail);
  }
}

BaseDynamics BaseDynamics::golden_rotation() { return BaseDynamics(TorusTranslation{{kGoldenShift}, true}); }

bool BaseDynamics::uniquely_ergodic() const {
  if (const auto* t = std::get_if<TorusTranslation>(&kind_)) return t->irrational;
  return is_periodic();
}

bool BaseDynamics::minimal() const { return uniquely_ergodic(); }

std::int64_t BaseDynamics::period() const {
  if (const auto* p = std::get_if<PeriodicOrbit>(&kind_)) return p->period;
  throw Error(ErrorKind::kBaseMismatch, "base dynamics is not a periodic orbit");
}

BasePoint iterate(const BaseDynamics& dyn, const BasePoint& point, std::int64_t n) {
  if (const auto* t = std::get_if<TorusPoint>(&point)) {
    const auto& shift = dyn.torus_shift_raw();
    if (shift.size() != t->raw.size()) throw Error(ErrorKind::kBaseMismatch, "torus point dimension mismatch");
    TorusPoint out = *t;
    const auto steps = static_cast<std::uint64_t>(n);  // two's complement: wraps mod 2^64
    for (std::size_t i = 0; i < out.raw.size(); ++i) out.raw[i] += steps * shift[i];
    return out;
  }
  if (const auto* o = std::get_if<OrbitPoint>(&point)) {
    const std::int64_t p = dyn.period();
    if (o->period != p) throw Error(ErrorKind::kBaseMismatch, "orbit point period mismatch");
    std::int64_t idx = (o->index + n % p) % p;
    if (idx < 0) idx += p;
    return OrbitPoint{idx, p};
  }
  const auto& s = std::get<ShiftPoint>(point);
  ShiftPoint out{s.sequence, s.offset + n};
  if (!out.sequence->known(out.offset)) {
    std::ostringstream os;
    os << "shift window exhausted: iterate by " << n << " leaves the known window";
    throw Error(ErrorKind::kWindowExhausted, os.str(), static_cast<double>(n));
  }
  return out;
}

BasePoint reference_point(const BaseDynamics& dyn) {
  if (const auto* t = std::get_if<TorusTranslation>(&dyn.kind())) {
    return TorusPoint{std::vector<std::uint64_t>(t->shift.size(), 0)};
  }
  if (dyn.is_periodic()) return OrbitPoint{0, dyn.period()};
  const auto& s = std::get<FullShift>(dyn.kind());
  return ShiftPoint{std::make_shared<const ShiftSequence>(s.point), s.origin};
}

std::vector<BasePoint> sample_points(const BaseDynamics& dyn, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorKind::kInvalidInput, "sample_points needs count >= 1");
  std::vector<BasePoint> out;
  if (dyn.is_periodic()) {
    const std::int64_t p = dyn.period();
    for (std::int64_t i = 0; i < p; ++i) out.emplace_back(OrbitPoint{i, p});
    return out;
  }
  std::mt19937_64 rng(seed);
  if (const auto* t = std::get_if<TorusTranslation>(&dyn.kind())) {
    for (std::size_t k = 0; k < count; ++k) {
      TorusPoint p;
      for (std::size_t i = 0; i < t->shift.size(); ++i) p.raw.push_back(rng());
      out.emplace_back(std::move(p));
    }
    return out;
  }
  const auto& s = std::get<FullShift>(dyn.kind());
  const auto radius = std::max<std::int64_t>(0, s.sample_radius);
  for (std::size_t k = 0; k < count; ++k) {
    auto seq = std::make_shared<ShiftSequence>();
    seq->left_tail = s.point.left_tail;
    seq->right_tail = s.point.right_tail;
    seq->center.resize(static_cast<std::size_t>(2 * radius + 1));
    for (auto& a : seq->center) a = static_cast<int>(rng() % static_cast<std::uint64_t>(s.alphabet));
    out.emplace_back(ShiftPoint{std::move(seq), radius});
  }
  return out;
}

double birkhoff_average(const BaseDynamics& dyn, const std::function<double(const BasePoint&)>& f,
                        const BasePoint& start, std::int64_t n) {
  if (n < 1) throw Error(ErrorKind::kInvalidInput, "birkhoff_average needs n >= 1");
  double sum = 0.0;
  BasePoint x = start;
  for (std::int64_t j = 0; j < n; ++j) {
    sum += f(x);
    if (j + 1 < n) x = iterate(dyn, x, 1);
  }
  return sum / static_cast<double>(n);
}

}  // namespace cocyclekit
