#include "cocyclekit/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "cocyclekit/parallel.hpp"

namespace cocyclekit {

namespace {

std::vector<std::vector<int>> subsets(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    out.push_back(idx);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

/// Runs the exterior-power products along the orbit and reports log singular
/// values (descending) at each requested horizon.
std::vector<std::vector<double>> log_singular_values_at(const CocycleSpec& spec, const BaseDynamics& dyn,
                                                        const BasePoint& point,
                                                        std::span<const std::int64_t> horizons) {
  const int d = spec.dim();
  std::vector<Matrix> prods;
  std::vector<double> scales(static_cast<std::size_t>(d), 0.0);
  for (int k = 1; k < d; ++k) {
    const auto n = static_cast<Eigen::Index>(subsets(d, k).size());
    prods.push_back(Matrix::Identity(n, n));
  }
  double log_det = 0.0;
  BasePoint x = point;
  std::vector<std::vector<double>> out;
  std::int64_t step = 0;
  for (const std::int64_t h : horizons) {
    for (; step < h; ++step) {
      const Matrix a = evaluate(spec, x);
      for (int k = 1; k < d; ++k) {
        Matrix& m = prods[static_cast<std::size_t>(k - 1)];
        m = compound(a, k) * m;
        const double f = m.norm();
        m /= f;
        scales[static_cast<std::size_t>(k - 1)] += std::log(f);
      }
      log_det += log_determinant(a).log_abs;
      x = iterate(dyn, x, 1);
    }
    std::vector<double> big_l(static_cast<std::size_t>(d + 1), 0.0);
    for (int k = 1; k < d; ++k) {
      big_l[static_cast<std::size_t>(k)] =
          scales[static_cast<std::size_t>(k - 1)] + std::log(operator_norm(prods[static_cast<std::size_t>(k - 1)]));
    }
    big_l[static_cast<std::size_t>(d)] = log_det;
    std::vector<double> logs(static_cast<std::size_t>(d));
    for (int k = 1; k <= d; ++k) {
      logs[static_cast<std::size_t>(k - 1)] = big_l[static_cast<std::size_t>(k)] - big_l[static_cast<std::size_t>(k - 1)];
    }
    out.push_back(std::move(logs));
  }
  return out;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() == 1) return y[0] / x[0];
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

Matrix polar_factor(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

double min_singular_value(const Matrix& m) {
  const Vector s = singular_values(m);
  return s(s.size() - 1);
}

void canonical_signs(Matrix& f) {
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      if (std::abs(f(i, j)) > 1e-8) {
        if (f(i, j) < 0.0) f.col(j) *= -1.0;
        break;
      }
    }
  }
}

/// The basis of span(basis) closest to target; falls back to sign-canonical columns.
Matrix align(const Matrix& basis, const Matrix& target) {
  const Matrix m = basis.transpose() * target;
  if (min_singular_value(m) < 1e-8) {
    Matrix f = basis;
    canonical_signs(f);
    return f;
  }
  return basis * polar_factor(m);
}

/// Orthonormal Q of m by Gram-Schmidt with one reorthogonalization pass;
/// log_diag receives log |R_jj|.
Matrix thin_q(Matrix m, Vector& log_diag) {
  const Eigen::Index n = m.cols();
  log_diag.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) m.col(j) -= m.col(i).dot(m.col(j)) * m.col(i);
    }
    const double r = m.col(j).norm();
    if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorKind::kNearSingular, "orthogonal iteration lost rank", r);
    m.col(j) /= r;
    log_diag(j) = std::log(r);
  }
  return m;
}

[[noreturn]] void increase_horizon(const std::string& why, std::int64_t horizon, double value) {
  std::ostringstream os;
  os << why << " at bundle horizon N = " << horizon << "; increase the horizon or check that the cut is dominated";
  throw Error(ErrorKind::kIncreaseHorizon, os.str(), value);
}

}  // namespace

Matrix compound(const Matrix& m, int k) {
  const int d = static_cast<int>(m.rows());
  if (m.cols() != d || k < 1 || k > d) throw Error(ErrorKind::kInvalidInput, "compound: need square m and 1 <= k <= d");
  const auto sets = subsets(d, k);
  const auto n = static_cast<Eigen::Index>(sets.size());
  Matrix out(n, n);
  Matrix minor(k, k);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          minor(i, j) = m(sets[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)],
                          sets[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)]);
        }
      }
      out(r, c) = k == 1 ? minor(0, 0) : minor.determinant();
    }
  }
  return out;
}

std::vector<double> product_log_singular_values(const CocycleSpec& spec, const BaseDynamics& dyn,
                                                const BasePoint& point, std::int64_t n) {
  if (n < 1) throw Error(ErrorKind::kInvalidInput, "product_log_singular_values needs n >= 1");
  const std::int64_t h[] = {n};
  return log_singular_values_at(spec, dyn, point, h).front();
}

std::vector<int> GapProfile::cuts() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < dominated.size(); ++i) {
    if (dominated[i]) out.push_back(static_cast<int>(i + 1));
  }
  return out;
}

GapProfile gap_profile(const CocycleSpec& spec, const BaseDynamics& dyn, std::span<const std::int64_t> horizons,
                       std::size_t samples, std::uint64_t seed, double slope_threshold) {
  if (horizons.empty()) throw Error(ErrorKind::kInvalidInput, "gap_profile needs at least one horizon");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (horizons[i] < 1 || (i > 0 && horizons[i] <= horizons[i - 1])) {
      throw Error(ErrorKind::kInvalidInput, "gap_profile horizons must be positive and increasing");
    }
  }
  const int d = spec.dim();
  const auto points = sample_points(dyn, samples, seed);
  const auto per_point = parallel_map<std::vector<std::vector<double>>>(
      points.size(), [&](std::size_t i) { return log_singular_values_at(spec, dyn, points[i], horizons); });

  GapProfile out;
  out.horizons.assign(horizons.begin(), horizons.end());
  out.slope_threshold = slope_threshold;
  out.sample_count = points.size();
  out.seed = seed;
  const auto gaps = static_cast<std::size_t>(std::max(d - 1, 0));
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    std::vector<double> row(gaps, std::numeric_limits<double>::infinity());
    for (const auto& p : per_point) {
      for (std::size_t i = 0; i < gaps; ++i) row[i] = std::min(row[i], p[h][i] - p[h][i + 1]);
    }
    out.log_min_ratio.push_back(std::move(row));
  }
  const std::size_t first = horizons.size() / 2;
  std::vector<double> xs;
  for (std::size_t h = first; h < horizons.size(); ++h) xs.push_back(static_cast<double>(horizons[h]));
  for (std::size_t i = 0; i < gaps; ++i) {
    std::vector<double> ys;
    for (std::size_t h = first; h < horizons.size(); ++h) ys.push_back(out.log_min_ratio[h][i]);
    const double slope = least_squares_slope(xs, ys);
    out.slopes.push_back(slope);
    out.dominated.push_back(slope > slope_threshold);
  }
  return out;
}

std::vector<int> partition_from_cuts(int dim, const std::vector<int>& cuts) {
  std::vector<int> out;
  int prev = 0;
  for (const int c : cuts) {
    if (c <= prev || c >= dim) throw Error(ErrorKind::kInvalidInput, "cuts must be increasing and inside (0, d)");
    out.push_back(c - prev);
    prev = c;
  }
  out.push_back(dim - prev);
  return out;
}

std::vector<int> cuts_from_partition(const std::vector<int>& partition) {
  std::vector<int> out;
  int acc = 0;
  for (std::size_t i = 0; i + 1 < partition.size(); ++i) {
    acc += partition[i];
    out.push_back(acc);
  }
  return out;
}

std::int64_t default_bundle_horizon(const GapProfile& profile, const std::vector<int>& cuts, double ratio_target) {
  if (cuts.empty()) return 1;
  double slope = std::numeric_limits<double>::infinity();
  for (const int c : cuts) slope = std::min(slope, profile.slopes.at(static_cast<std::size_t>(c - 1)));
  if (!(slope > profile.slope_threshold)) return profile.horizons.back();
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(std::log(ratio_target) / slope)));
}

BundleField::BundleField(CocycleSpec spec, BaseDynamics dyn, std::vector<int> partition, std::int64_t horizon,
                         std::uint64_t seed)
    : spec_(std::move(spec)), dyn_(std::move(dyn)), partition_(std::move(partition)), horizon_(horizon) {
  const int d = spec_.dim();
  if (partition_.empty() || std::accumulate(partition_.begin(), partition_.end(), 0) != d ||
      std::any_of(partition_.begin(), partition_.end(), [](int p) { return p < 1; })) {
    throw Error(ErrorKind::kInvalidInput, "partition must be positive dimensions summing to d");
  }
  if (partition_.size() > 1 && horizon_ < 1) throw Error(ErrorKind::kInvalidInput, "bundle horizon must be >= 1");
  start_frame_ = orthonormalize(uniform_matrix(d, d, seed ^ 0x5851f42d4c957f2dULL));

  double gap = 0.0;
  double quality = 1.0;
  const auto bases = raw_bases(reference_point(dyn_), gap, quality);
  for (const auto& b : bases) {
    // Axes best represented in the bundle, in increasing order.
    Eigen::ColPivHouseholderQR<Matrix> qr(Matrix(b.transpose()));
    std::vector<Eigen::Index> axes;
    for (Eigen::Index j = 0; j < b.cols(); ++j) axes.push_back(qr.colsPermutation().indices()(j));
    std::sort(axes.begin(), axes.end());
    Matrix target = Matrix::Zero(d, b.cols());
    for (std::size_t j = 0; j < axes.size(); ++j) target(axes[j], static_cast<Eigen::Index>(j)) = 1.0;
    reference_.push_back(align(b, target));
  }
}

std::vector<Matrix> BundleField::raw_bases(const BasePoint& point, double& min_gap, double& quality) const {
  const int d = spec_.dim();
  const std::size_t k = partition_.size();
  min_gap = std::numeric_limits<double>::infinity();
  quality = 1.0;
  if (k == 1) return {Matrix::Identity(d, d)};

  Vector step_logs;
  Vector fwd_logs = Vector::Zero(d);
  Matrix fwd = start_frame_;
  BasePoint y = iterate(dyn_, point, -horizon_);
  for (std::int64_t j = 0; j < horizon_; ++j) {
    fwd = thin_q(evaluate(spec_, y) * fwd, step_logs);
    fwd_logs += step_logs;
    y = iterate(dyn_, y, 1);
  }
  Vector bwd_logs = Vector::Zero(d);
  Matrix bwd = start_frame_;
  BasePoint z = iterate(dyn_, point, horizon_);
  for (std::int64_t j = 0; j < horizon_; ++j) {
    z = iterate(dyn_, z, -1);
    bwd = thin_q(evaluate(spec_, z).partialPivLu().solve(bwd), step_logs);
    bwd_logs += step_logs;
  }

  const auto cuts = cuts_from_partition(partition_);
  for (const int r : cuts) {
    min_gap = std::min(min_gap, fwd_logs(r - 1) - fwd_logs(r));
    min_gap = std::min(min_gap, bwd_logs(d - r - 1) - bwd_logs(d - r));
  }

  std::vector<Matrix> out;
  int lo = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const int hi = lo + partition_[i];
    const Matrix fast = fwd.leftCols(hi);
    const Matrix slow = bwd.leftCols(d - lo);
    if (i == 0) {
      out.push_back(fast);
    } else if (i + 1 == k) {
      out.push_back(slow);
    } else {
      Eigen::JacobiSVD<Matrix> svd(Matrix(fast.transpose() * slow), Eigen::ComputeFullV);
      quality = std::min(quality, svd.singularValues()(partition_[i] - 1));
      out.push_back(orthonormalize(Matrix(slow * svd.matrixV().leftCols(partition_[i]))));
    }
    lo = hi;
  }
  return out;
}

std::shared_ptr<const BundleField::Data> BundleField::at(const BasePoint& point) const {
  auto key = point_key(point);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  auto data = std::make_shared<Data>();
  const auto bases = raw_bases(point, data->min_cut_log_gap, data->intersection_quality);
  for (std::size_t i = 0; i < bases.size(); ++i) {
    data->frames.push_back(partition_.size() == 1 ? bases[i] : align(bases[i], reference_[i]));
  }
  std::lock_guard<std::mutex> lock(mutex_);
  return memo_.emplace(std::move(key), std::move(data)).first->second;
}

const Matrix& BundleField::frame(const BasePoint& point, std::size_t bundle) const {
  return at(point)->frames.at(bundle);
}

BundleEstimate estimate_bundles(const CocycleSpec& spec, const BaseDynamics& dyn, const std::vector<int>& partition,
                                std::span<const BasePoint> samples, const BundleOptions& options) {
  if (samples.empty()) throw Error(ErrorKind::kInvalidInput, "estimate_bundles needs at least one sample point");
  BundleEstimate out;
  out.partition = partition;
  out.horizon = options.horizon;
  out.angle_tolerance = options.angle_tolerance;
  out.field = std::make_shared<const BundleField>(spec, dyn, partition, options.horizon, options.seed);
  const auto& field = *out.field;

  out.points = parallel_map<PointBundles>(samples.size(), [&](std::size_t j) {
    const auto here = field.at(samples[j]);
    const auto next = field.at(iterate(dyn, samples[j], 1));
    const Matrix a = evaluate(spec, samples[j]);
    PointBundles pb{samples[j], here->frames, {}, here->min_cut_log_gap};
    for (std::size_t i = 0; i < here->frames.size(); ++i) {
      pb.defects.push_back(max_principal_angle(orthonormalize(Matrix(a * here->frames[i])), next->frames[i]));
    }
    return pb;
  });

  out.min_transversality = std::numbers::pi / 2;
  double min_gap = std::numeric_limits<double>::infinity();
  for (const auto& pb : out.points) {
    min_gap = std::min(min_gap, pb.min_cut_log_gap);
    for (std::size_t i = 0; i < pb.frames.size(); ++i) {
      out.max_defect = std::max(out.max_defect, pb.defects[i]);
      const auto& f = pb.frames[i];
      out.max_frame_error =
          std::max(out.max_frame_error, operator_norm(f.transpose() * f - Matrix::Identity(f.cols(), f.cols())));
      for (std::size_t j = i + 1; j < pb.frames.size(); ++j) {
        const double c = std::min(1.0, singular_values(Matrix(f.transpose() * pb.frames[j]))(0));
        out.min_transversality = std::min(out.min_transversality, std::acos(c));
      }
    }
  }
  if (partition.size() > 1 && min_gap < 1e-6) {
    increase_horizon("no growth gap across a cut (log gap " + std::to_string(min_gap) + ")", options.horizon, min_gap);
  }
  if (out.max_defect > options.angle_tolerance) {
    std::ostringstream os;
    os << "bundle invariance defect " << out.max_defect << " exceeds the angle tolerance " << options.angle_tolerance;
    increase_horizon(os.str(), options.horizon, out.max_defect);
  }
  return out;
}

RestrictedPoint restrict_point(const BundleField& field, const BasePoint& point) {
  const auto here = field.at(point);
  const auto next = field.at(iterate(field.dynamics(), point, 1));
  const Matrix a = evaluate(field.spec(), point);
  RestrictedPoint out;
  for (std::size_t i = 0; i < here->frames.size(); ++i) {
    const Matrix image = a * here->frames[i];
    const Matrix& g = next->frames[i];
    out.blocks.push_back(g.transpose() * image);
    out.residuals.push_back(operator_norm(image - g * out.blocks.back()) / operator_norm(image));
  }
  return out;
}

CocycleSpec restricted_cocycle(std::shared_ptr<const BundleField> field, std::size_t bundle) {
  const int dim = field->partition().at(bundle);
  return CocycleSpec::custom(dim, [field = std::move(field), bundle](const BasePoint& x) -> Matrix {
    const Matrix a = evaluate(field->spec(), x);
    return field->frame(iterate(field->dynamics(), x, 1), bundle).transpose() * a * field->frame(x, bundle);
  });
}

AdaptedMetric::AdaptedMetric(std::vector<CocycleSpec> restricted, BaseDynamics dyn, std::vector<double> centers,
                             std::vector<NormConfig> norms)
    : restricted_(std::move(restricted)), dyn_(std::move(dyn)), centers_(std::move(centers)), norms_(std::move(norms)) {
  if (centers_.size() != restricted_.size() || norms_.size() != restricted_.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "adapted metric: one center and norm per bundle required");
  }
  for (std::size_t i = 0; i < restricted_.size(); ++i) {
    normalized_.push_back(rescale_constant(restricted_[i], centers_[i]));
  }
}

std::shared_ptr<const AdaptedMetric::Data> AdaptedMetric::at(const BasePoint& point, std::size_t bundle) const {
  auto key = point_key(point);
  key.push_back(bundle);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  PositiveMatrix gram = gram_r(normalized_.at(bundle), dyn_, norms_[bundle], point).gram;
  Matrix s = gram.power(0.5);
  Matrix si = gram.power(-0.5);
  auto data = std::make_shared<const Data>(Data{std::move(gram), std::move(s), std::move(si)});
  std::lock_guard<std::mutex> lock(mutex_);
  return memo_.emplace(std::move(key), std::move(data)).first->second;
}

Matrix AdaptedMetric::adapted_block(const BasePoint& point, std::size_t bundle) const {
  return at(iterate(dyn_, point, 1), bundle)->sqrt * evaluate(restricted_.at(bundle), point) *
         at(point, bundle)->inverse_sqrt;
}

CocycleSpec AdaptedMetric::adapted_cocycle(std::size_t bundle) const {
  auto self = shared_from_this();
  return CocycleSpec::custom(restricted_.at(bundle).dim(),
                             [self, bundle](const BasePoint& x) { return self->adapted_block(x, bundle); });
}

AdaptedMetricResult adapted_metric(std::shared_ptr<const BundleField> field, const std::vector<double>& centers,
                                   const std::vector<double>& cut_slopes, const NormConfig& cfg,
                                   std::span<const BasePoint> samples) {
  const std::size_t k = field->bundle_count();
  if (centers.size() != k || cut_slopes.size() + 1 != k) {
    throw Error(ErrorKind::kDimensionMismatch, "adapted_metric: need one center per bundle and one slope per cut");
  }
  std::vector<CocycleSpec> restricted;
  for (std::size_t i = 0; i < k; ++i) restricted.push_back(restricted_cocycle(field, i));

  std::vector<double> base_eps(k, cfg.epsilon);
  for (std::size_t c = 0; c < cut_slopes.size(); ++c) {
    if (!(cut_slopes[c] > 0.0)) {
      throw Error(ErrorKind::kAdaptedMetricFailure, "adapted_metric: cut without positive gap slope", cut_slopes[c]);
    }
    base_eps[c] = std::min(base_eps[c], 0.2 * cut_slopes[c]);
    base_eps[c + 1] = std::min(base_eps[c + 1], 0.2 * cut_slopes[c]);
  }

  AdaptedMetricResult out;
  out.centers = centers;
  if (k > 1) {
    const auto euclid = parallel_map<double>(samples.size(), [&](std::size_t j) {
      const auto rp = restrict_point(*field, samples[j]);
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c + 1 < k; ++c) m = std::min(m, mininorm(rp.blocks[c]) / operator_norm(rp.blocks[c + 1]));
      return m;
    });
    out.euclidean_margin = *std::min_element(euclid.begin(), euclid.end());
  }

  constexpr int kAttempts = 3;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    out.attempts = static_cast<std::size_t>(attempt + 1);
    out.epsilons.clear();
    std::vector<NormConfig> norms;
    for (std::size_t i = 0; i < k; ++i) {
      NormConfig n = cfg;
      n.epsilon = base_eps[i] / static_cast<double>(1 << attempt);
      out.epsilons.push_back(n.epsilon);
      norms.push_back(n);
    }
    auto metric = std::make_shared<const AdaptedMetric>(restricted, field->dynamics(), centers, norms);
    out.metric = metric;
    if (k == 1) return out;

    const auto per_point = parallel_map<std::vector<double>>(samples.size(), [&](std::size_t j) {
      std::vector<double> m;
      for (std::size_t c = 0; c + 1 < k; ++c) {
        m.push_back(mininorm(metric->adapted_block(samples[j], c)) /
                    operator_norm(metric->adapted_block(samples[j], c + 1)));
      }
      return m;
    });
    out.cut_margins.assign(k - 1, std::numeric_limits<double>::infinity());
    for (const auto& m : per_point) {
      for (std::size_t c = 0; c + 1 < k; ++c) out.cut_margins[c] = std::min(out.cut_margins[c], m[c]);
    }
    out.margin = *std::min_element(out.cut_margins.begin(), out.cut_margins.end());
    if (out.margin > 1.0) return out;
  }
  std::ostringstream os;
  os << "adapted metric margin " << out.margin << " <= 1 after " << kAttempts
     << " epsilon reductions; try a longer bundle horizon or a smaller epsilon";
  throw Error(ErrorKind::kAdaptedMetricFailure, os.str(), out.margin);
}

std::string_view to_string(PipelineMode mode) {
  return mode == PipelineMode::kUniquelyErgodic ? "uniquely-ergodic" : "minimal";
}

SplitResult split(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                  std::span<const BasePoint> samples, const SplittingOptions& options) {
  SplitResult out;
  out.profile = gap_profile(spec, dyn, options.gap_horizons, options.gap_samples, options.seed,
                            options.slope_threshold);
  const auto flagged = out.profile.cuts();
  out.forced = options.forced_partition.has_value();
  out.partition = out.forced ? *options.forced_partition : partition_from_cuts(spec.dim(), flagged);
  const auto cuts = cuts_from_partition(out.partition);
  out.finest = cuts == flagged;
  if (!out.finest) out.warnings.push_back("the partition's cuts differ from the dominated indices of the gap profile");

  BundleOptions bopts;
  bopts.horizon = options.bundle_horizon.value_or(default_bundle_horizon(out.profile, cuts));
  bopts.angle_tolerance = options.angle_tolerance;
  bopts.seed = options.seed;
  out.bundles = estimate_bundles(spec, dyn, out.partition, samples, bopts);
  const auto field = out.bundles.field;

  out.restricted = parallel_map<RestrictedPoint>(samples.size(),
                                                 [&](std::size_t j) { return restrict_point(*field, samples[j]); });
  for (std::size_t i = 0; i < field->bundle_count(); ++i) {
    auto rep = estimate_exponents(restricted_cocycle(field, i), dyn, options.conformal.exponent_horizon,
                                  options.conformal.exponent_samples, options.seed);
    const double plus = rep.exact ? rep.exact->lambda_plus : rep.lambda_plus_est;
    const double minus = rep.exact ? rep.exact->lambda_minus : rep.lambda_minus_est;
    out.centers.push_back(0.5 * (plus + minus));
    out.bundle_exponents.push_back(std::move(rep));
  }
  std::vector<double> slopes;
  for (const int c : cuts) slopes.push_back(out.profile.slopes.at(static_cast<std::size_t>(c - 1)));
  out.adapted = adapted_metric(field, out.centers, slopes, cfg, samples);
  return out;
}

namespace {

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.rows();
  Matrix out = Matrix::Zero(n, n);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.block(at, at, b.rows(), b.cols()) = b;
    at += b.rows();
  }
  return out;
}

Matrix hstack(const std::vector<Matrix>& frames) {
  Eigen::Index cols = 0;
  for (const auto& f : frames) cols += f.cols();
  Matrix out(frames.front().rows(), cols);
  Eigen::Index at = 0;
  for (const auto& f : frames) {
    out.middleCols(at, f.cols()) = f;
    at += f.cols();
  }
  return out;
}

}  // namespace

SplittingReport conformal_splitting_pipeline(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                                             std::span<const BasePoint> samples, PipelineMode mode,
                                             const SplittingOptions& options) {
  if (mode == PipelineMode::kUniquelyErgodic && !dyn.uniquely_ergodic()) {
    throw Error(ErrorKind::kBaseMismatch, "uniquely-ergodic pipeline needs a uniquely ergodic base");
  }
  if (mode == PipelineMode::kMinimal && !dyn.minimal()) {
    throw Error(ErrorKind::kBaseMismatch, "minimal pipeline needs a minimal base");
  }
  SplittingReport out;
  out.mode = mode;
  out.split = split(spec, dyn, cfg, samples, options);
  out.warnings = out.split.warnings;
  out.determinant_tolerance = options.determinant_tolerance;
  const auto& field = out.split.bundles.field;
  const auto& metric = out.split.adapted.metric;
  const std::size_t k = field->bundle_count();
  const std::size_t n = samples.size();

  for (std::size_t i = 0; i < k; ++i) {
    BundleReport br;
    br.dim = field->partition()[i];
    const CocycleSpec restricted = restricted_cocycle(field, i);
    for (const auto& x : samples) br.lambda_frame.push_back(det_rescaling(restricted, x));
    if (mode == PipelineMode::kUniquelyErgodic) {
      ConformalOptions copts = options.conformal;
      copts.exponents = out.split.bundle_exponents[i];
      br.conformal = conformalize_constant(restricted, dyn, cfg, samples, copts);
    } else {
      br.conformal = conformalize_function(metric->adapted_cocycle(i), dyn, cfg, samples, options.conformal);
    }
    br.lambda = br.conformal.lambda_values;
    for (const auto& w : br.conformal.warnings) out.warnings.push_back("bundle " + std::to_string(i + 1) + ": " + w);
    out.bundles.push_back(std::move(br));
  }

  out.ordering_margin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i + 1 < k; ++i) {
      out.ordering_margin = std::min(out.ordering_margin, out.bundles[i].lambda[j] - out.bundles[i + 1].lambda[j]);
    }
  }
  if (k == 1) out.ordering_margin = 0.0;
  out.ordering_ok = k == 1 || out.ordering_margin > 0.0;

  out.conformal_ok = true;
  for (const auto& b : out.bundles) {
    out.max_conformality_defect = std::max(out.max_conformality_defect, b.conformal.conformality_defect);
    out.conformal_ok = out.conformal_ok && b.conformal.conformal_ok;
  }

  struct Assembled {
    Matrix a_tilde;
    double det_error = 0.0;
    double euclid_error = 0.0;
    double perturbation = 0.0;
    double defect = 0.0;
    double orthogonality = 0.0;
  };
  const auto assembled = parallel_map<Assembled>(n, [&](std::size_t j) {
    const BasePoint next = iterate(dyn, samples[j], 1);
    const auto& frames_here = field->at(samples[j])->frames;
    const auto& frames_next = field->at(next)->frames;
    const Matrix t = hstack(frames_here);
    const Matrix t_next = hstack(frames_next);
    const Matrix a = evaluate(spec, samples[j]);
    Assembled r;

    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += out.bundles[i].dim * out.bundles[i].lambda_frame[j];
    const double log_det = log_determinant(a).log_abs;
    const double log_det_g = log_det + log_determinant(t).log_abs - log_determinant(t_next).log_abs;
    r.det_error = std::abs(sum - log_det_g);
    r.euclid_error = std::abs(sum - log_det);

    std::vector<Matrix> blocks;
    std::vector<Matrix> metric_here;
    std::vector<Matrix> metric_next;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& pr = out.bundles[i].conformal.inner.points[j];
      const Matrix& c_tilde = out.bundles[i].conformal.a_tilde[j];
      if (mode == PipelineMode::kUniquelyErgodic) {
        blocks.push_back(c_tilde);
        metric_here.push_back(pr.r.gram.matrix());
        metric_next.push_back(pr.r_next.gram.matrix());
      } else {
        const auto h = metric->at(samples[j], i);
        const auto g = metric->at(next, i);
        blocks.push_back(g->inverse_sqrt * c_tilde * h->sqrt);
        metric_here.push_back(h->sqrt * pr.r.gram.matrix() * h->sqrt);
        metric_next.push_back(g->sqrt * pr.r_next.gram.matrix() * g->sqrt);
      }
    }
    const Matrix t_inv = t.inverse();
    const Matrix t_next_inv = t_next.inverse();
    r.a_tilde = t_next * block_diagonal(blocks) * t_inv;
    r.perturbation = operator_norm(a - r.a_tilde);
    const Matrix g_here = t_inv.transpose() * block_diagonal(metric_here) * t_inv;
    const Matrix g_next = t_next_inv.transpose() * block_diagonal(metric_next) * t_next_inv;

    const auto norm_in = [](const Matrix& g, const Vector& v) { return std::sqrt(v.dot(g * v)); };
    for (std::size_t i = 0; i < k; ++i) {
      const Matrix us = uniform_matrix(frames_here[i].cols(), 4, options.seed ^ (0x9e3779b97f4a7c15ULL * (j + 1) + i));
      for (Eigen::Index c = 0; c < us.cols(); ++c) {
        const Vector v = frames_here[i] * us.col(c);
        const double before = norm_in(g_here, v);
        const double after = norm_in(g_next, r.a_tilde * v);
        r.defect = std::max(r.defect, std::abs(after - std::exp(out.bundles[i].lambda[j]) * before) / before);
      }
      for (std::size_t l = i + 1; l < k; ++l) {
        r.orthogonality = std::max(r.orthogonality, operator_norm(frames_here[i].transpose() * g_here * frames_here[l]) /
                                                        operator_norm(g_here));
      }
    }
    return r;
  });

  for (const auto& r : assembled) {
    out.determinant_error = std::max(out.determinant_error, r.det_error);
    out.euclidean_determinant_error = std::max(out.euclidean_determinant_error, r.euclid_error);
    out.perturbation_size = std::max(out.perturbation_size, r.perturbation);
    out.assembled_defect = std::max(out.assembled_defect, r.defect);
    out.bundle_orthogonality = std::max(out.bundle_orthogonality, r.orthogonality);
    out.a_tilde.push_back(r.a_tilde);
  }
  out.determinant_ok = out.determinant_error <= out.determinant_tolerance;
  return out;
}

}  // namespace cocyclekit
