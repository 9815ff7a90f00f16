#pragma once

// Dominated splittings: singular-value gap profiles, invariant bundle frames,
// restricted cocycles, adapted metrics and the per-bundle conformal pipeline.

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cocyclekit/conformal.hpp"

namespace cocyclekit {

/// k-th exterior power of m in the lexicographic basis of k-subsets.
Matrix compound(const Matrix& m, int k);

/// log sigma_1 >= ... >= log sigma_d of A^n(omega), accumulated through
/// exterior powers so that tiny singular values keep relative accuracy.
std::vector<double> product_log_singular_values(const CocycleSpec& spec, const BaseDynamics& dyn,
                                                const BasePoint& point, std::int64_t n);

struct GapProfile {
  std::vector<std::int64_t> horizons;
  /// log_min_ratio[h][i]: min over samples of log(sigma_{i+1} / sigma_{i+2}) of A^{horizons[h]}.
  std::vector<std::vector<double>> log_min_ratio;
  /// Least-squares slope of log_min_ratio over the top half of the horizons, per index.
  std::vector<double> slopes;
  std::vector<bool> dominated;
  double slope_threshold = 0.02;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;

  /// Dominated indices, 1-based: index i separates sigma_i from sigma_{i+1}.
  std::vector<int> cuts() const;
};

GapProfile gap_profile(const CocycleSpec& spec, const BaseDynamics& dyn, std::span<const std::int64_t> horizons,
                       std::size_t samples, std::uint64_t seed, double slope_threshold = 0.02);

std::vector<int> partition_from_cuts(int dim, const std::vector<int>& cuts);
std::vector<int> cuts_from_partition(const std::vector<int>& partition);

/// Smallest N with predicted gap ratio >= target at every cut (>= 1).
std::int64_t default_bundle_horizon(const GapProfile& profile, const std::vector<int>& cuts, double ratio_target = 1e12);

/// Orthonormal frames of the estimated bundles as a deterministic function of
/// the base point. The rank-r fast bundle at omega is the top-r left singular
/// subspace of A^N(F^{-N} omega) and the slow complement the bottom right
/// singular subspace of A^N(omega), both by orthogonal iteration; middle
/// bundles are intersections. Frames are aligned to fixed reference frames.
class BundleField {
 public:
  struct Data {
    std::vector<Matrix> frames;
    /// Smallest accumulated log growth gap across each cut, forward and backward.
    double min_cut_log_gap = 0.0;
    /// Smallest cosine of the intersection used for the middle bundles (1 when none).
    double intersection_quality = 1.0;
  };

  BundleField(CocycleSpec spec, BaseDynamics dyn, std::vector<int> partition, std::int64_t horizon,
              std::uint64_t seed);

  const std::vector<int>& partition() const { return partition_; }
  std::size_t bundle_count() const { return partition_.size(); }
  std::int64_t horizon() const { return horizon_; }
  const CocycleSpec& spec() const { return spec_; }
  const BaseDynamics& dynamics() const { return dyn_; }

  std::shared_ptr<const Data> at(const BasePoint& point) const;
  const Matrix& frame(const BasePoint& point, std::size_t bundle) const;

 private:
  std::vector<Matrix> raw_bases(const BasePoint& point, double& min_gap, double& quality) const;

  CocycleSpec spec_;
  BaseDynamics dyn_;
  std::vector<int> partition_;
  std::int64_t horizon_;
  Matrix start_frame_;
  std::vector<Matrix> reference_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::vector<std::uint64_t>, std::shared_ptr<const Data>, PointKeyHash> memo_;
};

struct PointBundles {
  BasePoint point;
  std::vector<Matrix> frames;
  /// Max principal angle between A(omega) span F_i(omega) and span F_i(F omega).
  std::vector<double> defects;
  double min_cut_log_gap = 0.0;
};

struct BundleEstimate {
  std::vector<int> partition;
  std::int64_t horizon = 0;
  double angle_tolerance = 0.0;
  std::vector<PointBundles> points;
  double max_defect = 0.0;
  /// max ||F^T F - I|| over frames.
  double max_frame_error = 0.0;
  /// Smallest principal angle between two different bundles at any sample.
  double min_transversality = 0.0;
  std::shared_ptr<const BundleField> field;
};

struct BundleOptions {
  std::int64_t horizon = 0;
  double angle_tolerance = 1e-6;
  std::uint64_t seed = 0;
};

/// Throws increase-horizon when a cut has no growth gap or a defect exceeds the angle tolerance.
BundleEstimate estimate_bundles(const CocycleSpec& spec, const BaseDynamics& dyn, const std::vector<int>& partition,
                                std::span<const BasePoint> samples, const BundleOptions& options);

struct RestrictedPoint {
  /// A_i(omega) = F_i(F omega)^T A(omega) F_i(omega).
  std::vector<Matrix> blocks;
  std::vector<double> residuals;
};

RestrictedPoint restrict_point(const BundleField& field, const BasePoint& point);

/// omega -> A_i(omega) as a cocycle over the same base.
CocycleSpec restricted_cocycle(std::shared_ptr<const BundleField> field, std::size_t bundle);

/// Per-bundle Lyapunov Gram field of e^{-c_i} A_i with per-bundle epsilon_i.
class AdaptedMetric : public std::enable_shared_from_this<AdaptedMetric> {
 public:
  struct Data {
    PositiveMatrix gram;
    Matrix sqrt;
    Matrix inverse_sqrt;
  };

  AdaptedMetric(std::vector<CocycleSpec> restricted, BaseDynamics dyn, std::vector<double> centers,
                std::vector<NormConfig> norms);

  std::size_t bundle_count() const { return restricted_.size(); }
  const std::vector<double>& centers() const { return centers_; }
  const std::vector<NormConfig>& norms() const { return norms_; }

  std::shared_ptr<const Data> at(const BasePoint& point, std::size_t bundle) const;
  /// R_i(F omega)^{1/2} A_i(omega) R_i(omega)^{-1/2}.
  Matrix adapted_block(const BasePoint& point, std::size_t bundle) const;
  /// Same map as a cocycle.
  CocycleSpec adapted_cocycle(std::size_t bundle) const;

 private:
  std::vector<CocycleSpec> restricted_;
  std::vector<CocycleSpec> normalized_;
  BaseDynamics dyn_;
  std::vector<double> centers_;
  std::vector<NormConfig> norms_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::vector<std::uint64_t>, std::shared_ptr<const Data>, PointKeyHash> memo_;
};

struct AdaptedMetricResult {
  std::vector<double> epsilons;
  std::vector<double> centers;
  /// min over samples of m(A_i) / ||A_{i+1}|| in the adapted metric, per cut.
  std::vector<double> cut_margins;
  double margin = 0.0;
  /// The same quantity for the Euclidean frame metric.
  double euclidean_margin = 0.0;
  std::size_t attempts = 0;
  std::shared_ptr<const AdaptedMetric> metric;
};

/// Tries epsilon_i = min(epsilon, 0.2 * adjacent cut slopes), then halves it
/// twice; throws adapted-metric-failure if no attempt gives margin > 1.
AdaptedMetricResult adapted_metric(std::shared_ptr<const BundleField> field, const std::vector<double>& centers,
                                   const std::vector<double>& cut_slopes, const NormConfig& cfg,
                                   std::span<const BasePoint> samples);

enum class PipelineMode { kUniquelyErgodic, kMinimal };

std::string_view to_string(PipelineMode mode);

struct SplittingOptions {
  std::vector<std::int64_t> gap_horizons = {1, 2, 4, 8, 16, 32, 64};
  std::size_t gap_samples = 64;
  double slope_threshold = 0.02;
  std::optional<std::vector<int>> forced_partition;
  std::optional<std::int64_t> bundle_horizon;
  double angle_tolerance = 1e-6;
  double determinant_tolerance = 1e-8;
  std::uint64_t seed = 0;
  ConformalOptions conformal;
};

/// Output of gap_profile -> estimate_bundles -> restrict -> adapted_metric.
struct SplitResult {
  GapProfile profile;
  std::vector<int> partition;
  bool forced = false;
  /// Every flagged index is a cut and every cut is flagged.
  bool finest = true;
  BundleEstimate bundles;
  std::vector<RestrictedPoint> restricted;
  std::vector<ExponentReport> bundle_exponents;
  std::vector<double> centers;
  AdaptedMetricResult adapted;
  std::vector<std::string> warnings;
};

SplitResult split(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                  std::span<const BasePoint> samples, const SplittingOptions& options = {});

struct BundleReport {
  int dim = 0;
  /// Euclidean-frame rates (1/d_i) log|det A_i(omega)| per sample.
  std::vector<double> lambda_frame;
  /// Rates of the conformal factor actually used: constants, or adapted-metric determinants.
  std::vector<double> lambda;
  ConformalResult conformal;
};

struct SplittingReport {
  PipelineMode mode = PipelineMode::kUniquelyErgodic;
  SplitResult split;
  std::vector<BundleReport> bundles;
  /// Smallest lambda_i - lambda_{i+1} (pointwise in minimal mode).
  double ordering_margin = 0.0;
  bool ordering_ok = true;
  /// max | sum d_i lambda_frame_i - log|det A|_G |, G the block-orthogonal frame metric.
  double determinant_error = 0.0;
  /// The same against the plain Euclidean log|det A|.
  double euclidean_determinant_error = 0.0;
  double determinant_tolerance = 0.0;
  bool determinant_ok = false;
  double max_conformality_defect = 0.0;
  bool conformal_ok = false;
  /// Assembled perturbation A~ = T(F w) diag(A~_i) T(w)^{-1} and its checks.
  std::vector<Matrix> a_tilde;
  double perturbation_size = 0.0;
  double assembled_defect = 0.0;
  double bundle_orthogonality = 0.0;
  std::vector<std::string> warnings;
};

SplittingReport conformal_splitting_pipeline(const CocycleSpec& spec, const BaseDynamics& dyn, const NormConfig& cfg,
                                             std::span<const BasePoint> samples, PipelineMode mode,
                                             const SplittingOptions& options = {});

}  // namespace cocyclekit
