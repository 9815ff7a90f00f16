#include "cocyclekit/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

namespace cocyclekit {

namespace {

constexpr const char* kFiniteSampleNote =
    "Verdicts are evaluated at the sampled base points and finite horizons recorded in the config echo; "
    "they are numerical evidence for the stated invariants, not proofs.";

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Builder {
 public:
  Builder(std::string_view command, const ExperimentConfig& cfg, const RunOptions& options) {
    report_["command"] = std::string(command);
    report_["mode"] = options.mode.empty() ? Json(nullptr) : Json(options.mode);
    report_["strict"] = options.strict;
    report_["config"] = cfg.echo;
    report_["note"] = kFiniteSampleNote;
    report_["stages"] = Json::object();
    report_["verdicts"] = Json::array();
    report_["warnings"] = Json::array();
  }

  template <typename F>
  auto stage(const std::string& name, F&& fn) {
    current_ = name;
    // Records the elapsed time on the way out, including when fn throws.
    struct Clock {
      Json& into;
      const std::string& key;
      std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
      ~Clock() { into[key] = seconds_since(t0); }
    } clock{timings_, name};
    return fn();
  }

  Json& stages() { return report_["stages"]; }

  /// relation is "<=", "<", ">" or "==": value relation bound must hold.
  void verdict(const std::string& name, double value, const std::string& relation, double bound,
               const char* tolerance_key = nullptr) {
    bool ok = false;
    if (relation == "<=") ok = value <= bound;
    if (relation == "<") ok = value < bound;
    if (relation == ">") ok = value > bound;
    if (relation == "==") ok = value == bound;
    Json v;
    v["name"] = name;
    v["passed"] = ok;
    v["value"] = value;
    v["relation"] = relation;
    v["bound"] = bound;
    v["tolerance"] = tolerance_key ? Json(tolerance_key) : Json(nullptr);
    report_["verdicts"].push_back(std::move(v));
    all_passed_ = all_passed_ && ok;
  }

  void check(const std::string& name, bool ok) {
    Json v;
    v["name"] = name;
    v["passed"] = ok;
    v["value"] = ok;
    v["relation"] = "==";
    v["bound"] = true;
    v["tolerance"] = nullptr;
    report_["verdicts"].push_back(std::move(v));
    all_passed_ = all_passed_ && ok;
  }

  void warn(const std::string& w) { report_["warnings"].push_back(w); }
  void warn_all(const std::vector<std::string>& ws) {
    for (const auto& w : ws) warn(w);
  }

  void csv(std::string name, std::string contents) { csv_.emplace_back(std::move(name), std::move(contents)); }

  RunOutput finish() {
    RunOutput out;
    report_["passed"] = all_passed_ && !failed_;
    out.exit_code = failed_ ? kExitNumerical : (all_passed_ ? kExitOk : kExitInvariantFailure);
    out.report = std::move(report_);
    out.timings = std::move(timings_);
    out.csv = std::move(csv_);
    return out;
  }

  void fail(const Error& e) {
    failed_ = true;
    Json err;
    err["stage"] = current_;
    err["kind"] = std::string(to_string(e.kind()));
    err["message"] = e.what();
    err["value"] = e.value();
    report_["error"] = std::move(err);
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  Json report_;
  Json timings_ = Json::object();
  std::vector<std::pair<std::string, std::string>> csv_;
  std::string current_;
  bool all_passed_ = true;
  bool failed_ = false;
};

Json exponents_json(const ExponentReport& e) {
  Json j;
  j["lambda_plus_upper"] = e.lambda_plus_upper;
  j["lambda_plus_est"] = e.lambda_plus_est;
  j["lambda_minus_lower"] = e.lambda_minus_lower;
  j["lambda_minus_est"] = e.lambda_minus_est;
  j["horizon"] = e.horizon;
  j["sample_count"] = e.sample_count;
  j["seed"] = e.seed;
  Json rows = Json::array();
  for (const auto& r : e.schedule) {
    rows.push_back(Json{{"k", r.k}, {"max_log_norm", r.max_log_norm}, {"max_log_inverse_norm", r.max_log_inverse_norm}});
  }
  j["schedule"] = std::move(rows);
  if (e.exact) {
    j["exact"] = Json{{"lambda_plus", e.exact->lambda_plus},
                      {"lambda_minus", e.exact->lambda_minus},
                      {"log_moduli", e.exact->log_moduli}};
  } else {
    j["exact"] = nullptr;
  }
  return j;
}

Json reduction_json(const ReductionResult& r, bool full) {
  const auto& d = r.diagnostics;
  Json j;
  j["epsilon"] = r.epsilon;
  j["common_truncation"] = r.common_truncation;
  j["diagnostics"] = Json{{"perturbation_size", d.perturbation_size},
                          {"perturbation_bound", d.perturbation_bound},
                          {"max_a_norm", d.max_a_norm},
                          {"p_spectrum_min", d.p_spectrum_min},
                          {"p_spectrum_max", d.p_spectrum_max},
                          {"invariance_residual", d.invariance_residual},
                          {"worst_residual_index", d.worst_residual_index},
                          {"metric_error", d.metric_error},
                          {"max_slack", d.max_slack},
                          {"almost_invariance_ok", d.almost_invariance_ok},
                          {"p_spectrum_ok", d.p_spectrum_ok},
                          {"residual_ok", d.residual_ok},
                          {"metric_ok", d.metric_ok},
                          {"perturbation_ok", d.perturbation_ok},
                          {"proof_chain_ok", d.proof_chain_ok}};
  Json points = Json::array();
  for (const auto& p : r.points) {
    Json q;
    q["point"] = describe(p.point);
    q["truncation"] = p.r.truncation_used;
    q["tail_bound"] = p.r.tail_bound;
    q["gram_min_eigenvalue"] = p.r.gram.min_eigenvalue();
    q["gram_max_eigenvalue"] = p.r.gram.max_eigenvalue();
    q["lower_margin"] = p.almost_invariance.lower_margin;
    q["upper_margin"] = p.almost_invariance.upper_margin;
    q["p_min"] = p.p_min;
    q["p_max"] = p.p_max;
    q["residual"] = p.residual;
    q["slack"] = p.slack;
    q["perturbation"] = p.perturbation;
    if (full) {
      q["a"] = matrix_json(p.a);
      q["p"] = matrix_json(p.p);
      q["a_tilde"] = matrix_json(p.a_tilde);
      q["r"] = matrix_json(p.r.gram.matrix());
      q["r_next"] = matrix_json(p.r_next.gram.matrix());
    }
    points.push_back(std::move(q));
  }
  j["points"] = std::move(points);
  return j;
}

void reduction_verdicts(Builder& b, const ReductionResult& r, const std::string& prefix) {
  const auto& d = r.diagnostics;
  double worst_sandwich = -std::numeric_limits<double>::infinity();
  double worst_chain = -std::numeric_limits<double>::infinity();
  double worst_p = -std::numeric_limits<double>::infinity();
  double worst_perturbation = -std::numeric_limits<double>::infinity();
  const double eps = r.epsilon;
  for (const auto& p : r.points) {
    const auto& ai = p.almost_invariance;
    worst_sandwich = std::max(worst_sandwich, -std::min(ai.lower_margin, ai.upper_margin) - ai.slack);
    worst_chain = std::max(worst_chain, -std::min({p.chain_upper_margin, p.chain_upper_sqrt_margin, p.chain_lower_margin,
                                                   p.chain_lower_sqrt_margin}) -
                                            p.chain_slack);
    worst_p = std::max({worst_p, std::exp(-eps) * (1.0 - p.slack) - p.p_min, p.p_max - std::exp(eps) * (1.0 + p.slack)});
    const double a_norm = operator_norm(p.a);
    const double bound = (std::exp(eps) - 1.0) * a_norm + std::exp(eps) * p.slack * a_norm;
    worst_perturbation = std::max(worst_perturbation, p.perturbation - bound);
  }
  // Each value is the worst excess over its per-point bound; negative means the bound holds.
  b.verdict(prefix + "almost_invariance", worst_sandwich, "<", 0.0);
  b.verdict(prefix + "p_spectrum", worst_p, "<", 0.0);
  b.verdict(prefix + "invariance_residual", d.invariance_residual, "<=", r.tolerances.invariance_residual,
            "tolerances.invariance_residual");
  b.verdict(prefix + "metric_preservation", d.metric_error, "<=", r.tolerances.metric_preservation,
            "tolerances.metric_preservation");
  b.verdict(prefix + "perturbation_bound", worst_perturbation, "<=", 0.0);
  b.verdict(prefix + "proof_chain", worst_chain, "<", 0.0);
}

ReduceOptions reduce_options(const ExperimentConfig& cfg, const RunOptions& options) {
  return ReduceOptions{cfg.tolerances.reduction, options.strict, cfg.sampling.seed};
}

ConformalOptions conformal_options(const ExperimentConfig& cfg, const RunOptions& options) {
  ConformalOptions c;
  c.reduce = reduce_options(cfg, options);
  c.gap_tolerance = cfg.tolerances.gap;
  c.conformality_tolerance = cfg.tolerances.conformality;
  c.exponent_horizon = cfg.sampling.horizon;
  c.exponent_samples = cfg.sampling.exponent_samples;
  return c;
}

SplittingOptions splitting_options(const ExperimentConfig& cfg, const RunOptions& options) {
  SplittingOptions s;
  s.gap_horizons = cfg.sampling.gap_horizons;
  s.gap_samples = cfg.sampling.count;
  s.slope_threshold = cfg.splitting.slope_threshold;
  s.forced_partition = cfg.splitting.forced_partition;
  s.bundle_horizon = cfg.sampling.bundle_horizon;
  s.angle_tolerance = cfg.tolerances.angle;
  s.determinant_tolerance = cfg.tolerances.determinant;
  s.seed = cfg.sampling.seed;
  s.conformal = conformal_options(cfg, options);
  return s;
}

Json conformal_json(const ConformalResult& c, bool full) {
  Json j;
  j["mode"] = std::string(to_string(c.mode));
  j["lambda"] = c.mode == ConformalMode::kConstant ? Json(c.lambda) : Json(nullptr);
  j["lambda_values"] = c.lambda_values;
  j["exponents"] = c.exponents ? exponents_json(*c.exponents) : Json(nullptr);
  j["exponent_gap"] = c.exponent_gap;
  j["gap_tolerance"] = c.gap_tolerance;
  j["gap_ok"] = c.gap_ok;
  j["conformality_defect"] = c.conformality_defect;
  j["conformality_tolerance"] = c.conformality_tolerance;
  j["sandwich_violation"] = c.mode == ConformalMode::kFunction ? Json(c.sandwich_violation) : Json(nullptr);
  j["birkhoff_error"] = c.birkhoff_error ? Json(*c.birkhoff_error) : Json(nullptr);
  j["inner"] = reduction_json(c.inner, full);
  if (full) {
    Json m = Json::array();
    for (const auto& a : c.a_tilde) m.push_back(matrix_json(a));
    j["a_tilde"] = std::move(m);
  }
  return j;
}

void conformal_verdicts(Builder& b, const ConformalResult& c, const std::string& prefix) {
  b.verdict(prefix + "conformality", c.conformality_defect, "<=", c.conformality_tolerance, "tolerances.conformality");
  b.verdict(prefix + "invariance_residual", c.inner.diagnostics.invariance_residual, "<=",
            c.inner.tolerances.invariance_residual, "tolerances.invariance_residual");
  b.verdict(prefix + "metric_preservation", c.inner.diagnostics.metric_error, "<=",
            c.inner.tolerances.metric_preservation, "tolerances.metric_preservation");
  if (c.mode == ConformalMode::kFunction) {
    b.verdict(prefix + "determinant_sandwich", c.sandwich_violation, "<=", 0.0);
    if (c.birkhoff_error && c.gap_ok) {
      b.verdict(prefix + "birkhoff_consistency", *c.birkhoff_error, "<=", c.gap_tolerance, "tolerances.gap");
    }
  }
}

Json gap_profile_json(const GapProfile& g) {
  Json j;
  j["horizons"] = g.horizons;
  j["log_min_ratio"] = g.log_min_ratio;
  j["slopes"] = g.slopes;
  j["dominated"] = g.dominated;
  j["slope_threshold"] = g.slope_threshold;
  j["sample_count"] = g.sample_count;
  j["seed"] = g.seed;
  j["cuts"] = g.cuts();
  return j;
}

std::string gap_profile_csv(const GapProfile& g) {
  std::string s = "horizon,index,min_ratio,log_min_ratio\n";
  for (std::size_t h = 0; h < g.horizons.size(); ++h) {
    for (std::size_t i = 0; i < g.log_min_ratio[h].size(); ++i) {
      const double l = g.log_min_ratio[h][i];
      s += std::to_string(g.horizons[h]) + "," + std::to_string(i + 1) + "," + csv_number(std::exp(l)) + "," +
           csv_number(l) + "\n";
    }
  }
  return s;
}

Json split_json(const SplitResult& s, bool full) {
  Json j;
  j["gap_profile"] = gap_profile_json(s.profile);
  j["partition"] = s.partition;
  j["forced"] = s.forced;
  j["finest"] = s.finest;
  const auto& be = s.bundles;
  Json bundles;
  bundles["horizon"] = be.horizon;
  bundles["angle_tolerance"] = be.angle_tolerance;
  bundles["max_defect"] = be.max_defect;
  bundles["max_frame_error"] = be.max_frame_error;
  bundles["min_transversality"] = be.min_transversality;
  Json points = Json::array();
  for (std::size_t j2 = 0; j2 < be.points.size(); ++j2) {
    const auto& p = be.points[j2];
    Json q;
    q["point"] = describe(p.point);
    q["defects"] = p.defects;
    q["min_cut_log_gap"] = p.min_cut_log_gap;
    q["restriction_residuals"] = s.restricted[j2].residuals;
    if (full) {
      Json frames = Json::array();
      for (const auto& f : p.frames) frames.push_back(matrix_json(f));
      q["frames"] = std::move(frames);
      Json blocks = Json::array();
      for (const auto& m : s.restricted[j2].blocks) blocks.push_back(matrix_json(m));
      q["restricted"] = std::move(blocks);
    }
    points.push_back(std::move(q));
  }
  bundles["points"] = std::move(points);
  j["bundles"] = std::move(bundles);
  Json exps = Json::array();
  for (const auto& e : s.bundle_exponents) exps.push_back(exponents_json(e));
  j["bundle_exponents"] = std::move(exps);
  j["centers"] = s.centers;
  const auto& a = s.adapted;
  j["adapted_metric"] = Json{{"epsilons", a.epsilons},
                             {"centers", a.centers},
                             {"cut_margins", a.cut_margins},
                             {"margin", s.partition.size() > 1 ? Json(a.margin) : Json(nullptr)},
                             {"euclidean_margin", s.partition.size() > 1 ? Json(a.euclidean_margin) : Json(nullptr)},
                             {"attempts", a.attempts}};
  return j;
}

void split_verdicts(Builder& b, const SplitResult& s, const ExperimentConfig& cfg) {
  b.check("finest_partition", s.finest);
  b.verdict("bundle_invariance", s.bundles.max_defect, "<=", cfg.tolerances.angle, "tolerances.angle");
  b.verdict("frame_orthonormality", s.bundles.max_frame_error, "<=", cfg.tolerances.frame, "tolerances.frame");
  if (s.partition.size() > 1) b.verdict("adapted_margin", s.adapted.margin, ">", 1.0);
}

std::vector<BasePoint> samples_for(const ExperimentConfig& cfg) {
  return sample_points(cfg.dynamics, cfg.sampling.count, cfg.sampling.seed);
}

void cmd_exponents(Builder& b, const ExperimentConfig& cfg) {
  const auto& s = cfg.sampling;
  const auto rep = b.stage("exponents", [&] {
    return estimate_exponents(cfg.cocycle, cfg.dynamics, s.horizon, s.exponent_samples, s.seed);
  });
  b.stages()["exponents"] = exponents_json(rep);
  const auto bounds = b.stage("product_bounds", [&] {
    return product_bounded_diagnostic(cfg.cocycle, cfg.dynamics, s.horizon, s.exponent_samples, s.seed);
  });
  b.stages()["product_bounds"] = Json{{"horizon", s.horizon},
                                      {"log_sup_norm", bounds.log_sup_norm},
                                      {"log_inf_mininorm", bounds.log_inf_mininorm}};
  const double tol = cfg.tolerances.exponent_order;
  b.stages()["uniform_subexponential"] =
      std::max(std::abs(rep.lambda_plus_est), std::abs(rep.lambda_minus_est)) <= cfg.tolerances.gap;
  b.verdict("exponent_order", rep.lambda_minus_est - rep.lambda_plus_est, "<=", tol, "tolerances.exponent_order");
  if (rep.exact) {
    b.verdict("upper_bound_consistency", rep.exact->lambda_plus - rep.lambda_plus_upper, "<=", tol,
              "tolerances.exponent_order");
    b.verdict("lower_bound_consistency", rep.lambda_minus_lower - rep.exact->lambda_minus, "<=", tol,
              "tolerances.exponent_order");
  }
}

void cmd_reduce(Builder& b, const ExperimentConfig& cfg, const RunOptions& options) {
  const auto samples = samples_for(cfg);
  const auto result = b.stage("reduce", [&] {
    return reduce(cfg.cocycle, cfg.dynamics, cfg.norm, samples, reduce_options(cfg, options));
  });
  b.stages()["reduction"] = reduction_json(result, cfg.full);
  reduction_verdicts(b, result, "");

  const auto near = b.stage("conjugates", [&] { return conjugate_near_isometry(result); });
  const auto iso = isometric_conjugate(result);
  b.stages()["near_isometry"] = Json{{"worst_sv_min", near.worst_sv_min},
                                     {"worst_sv_max", near.worst_sv_max},
                                     {"slack", near.slack},
                                     {"within_bounds", near.within_bounds}};
  b.stages()["isometric_conjugate"] = Json{{"worst_defect", iso.worst_defect},
                                           {"worst_index", iso.worst_index},
                                           {"tolerance", iso.tolerance}};
  double worst_sv = -std::numeric_limits<double>::infinity();
  const double eps = result.epsilon;
  for (std::size_t i = 0; i < near.points.size(); ++i) {
    const double s = std::exp(eps) * result.points[i].slack;
    worst_sv = std::max({worst_sv, std::exp(-eps) - s - near.points[i].sv_min, near.points[i].sv_max - std::exp(eps) - s});
  }
  b.verdict("near_isometry", worst_sv, "<", 0.0);
  b.verdict("orthogonality_defect", iso.worst_defect, "<=", iso.tolerance, "tolerances.orthogonality_defect");

  if (cfg.dynamics.is_periodic()) {
    const auto spectrum = periodic_isometry(result, cfg.dynamics);
    Json ev = Json::array();
    for (const auto& z : spectrum.eigenvalues) ev.push_back(Json{z.real(), z.imag()});
    b.stages()["orbit_product"] = Json{{"eigenvalues", ev},
                                       {"max_modulus_error", spectrum.max_modulus_error},
                                       {"determinant_error", spectrum.determinant_error},
                                       {"eigenvector_condition", spectrum.eigenvector_condition}};
    b.verdict("eigenvalue_modulus", spectrum.max_modulus_error, "<=", cfg.tolerances.spectrum, "tolerances.spectrum");
    b.verdict("unit_determinant", spectrum.determinant_error, "<=", cfg.tolerances.spectrum, "tolerances.spectrum");
  }
}

void cmd_conformalize(Builder& b, const ExperimentConfig& cfg, const RunOptions& options) {
  if (options.mode != "constant" && options.mode != "function") {
    throw ConfigError("conformalize needs --mode constant or --mode function");
  }
  const auto samples = samples_for(cfg);
  const auto opts = conformal_options(cfg, options);
  const auto c = b.stage("conformalize", [&] {
    return options.mode == "constant" ? conformalize_constant(cfg.cocycle, cfg.dynamics, cfg.norm, samples, opts)
                                      : conformalize_function(cfg.cocycle, cfg.dynamics, cfg.norm, samples, opts);
  });
  b.stages()["conformal"] = conformal_json(c, cfg.full);
  b.warn_all(c.warnings);
  conformal_verdicts(b, c, "");
}

void cmd_split(Builder& b, const ExperimentConfig& cfg, const RunOptions& options) {
  const auto samples = samples_for(cfg);
  const auto s = b.stage("split", [&] {
    return split(cfg.cocycle, cfg.dynamics, cfg.norm, samples, splitting_options(cfg, options));
  });
  b.stages()["split"] = split_json(s, cfg.full);
  b.csv("gap_profile.csv", gap_profile_csv(s.profile));
  b.warn_all(s.warnings);
  split_verdicts(b, s, cfg);
}

void cmd_pipeline(Builder& b, const ExperimentConfig& cfg, const RunOptions& options) {
  PipelineMode mode;
  if (options.mode == "uniquely-ergodic") {
    mode = PipelineMode::kUniquelyErgodic;
  } else if (options.mode == "minimal") {
    mode = PipelineMode::kMinimal;
  } else {
    throw ConfigError("pipeline needs --mode uniquely-ergodic or --mode minimal");
  }
  const auto samples = samples_for(cfg);
  const auto r = b.stage("pipeline", [&] {
    return conformal_splitting_pipeline(cfg.cocycle, cfg.dynamics, cfg.norm, samples, mode,
                                        splitting_options(cfg, options));
  });
  b.stages()["split"] = split_json(r.split, cfg.full);
  b.csv("gap_profile.csv", gap_profile_csv(r.split.profile));
  Json bundles = Json::array();
  for (const auto& br : r.bundles) {
    Json j;
    j["dim"] = br.dim;
    j["lambda"] = mode == PipelineMode::kUniquelyErgodic ? Json(br.conformal.lambda) : Json(br.lambda);
    j["lambda_frame"] = br.lambda_frame;
    j["conformal"] = conformal_json(br.conformal, cfg.full);
    bundles.push_back(std::move(j));
  }
  Json p;
  p["mode"] = std::string(to_string(mode));
  p["bundles"] = std::move(bundles);
  p["ordering_margin"] = r.bundles.size() > 1 ? Json(r.ordering_margin) : Json(nullptr);
  p["determinant_error"] = r.determinant_error;
  p["euclidean_determinant_error"] = r.euclidean_determinant_error;
  p["max_conformality_defect"] = r.max_conformality_defect;
  p["assembled_defect"] = r.assembled_defect;
  p["bundle_orthogonality"] = r.bundle_orthogonality;
  p["perturbation_size"] = r.perturbation_size;
  if (cfg.full) {
    Json m = Json::array();
    for (const auto& a : r.a_tilde) m.push_back(matrix_json(a));
    p["a_tilde"] = std::move(m);
  }
  b.stages()["pipeline"] = std::move(p);
  b.warn_all(r.warnings);

  split_verdicts(b, r.split, cfg);
  for (std::size_t i = 0; i < r.bundles.size(); ++i) {
    conformal_verdicts(b, r.bundles[i].conformal, "bundle" + std::to_string(i + 1) + ".");
  }
  if (r.bundles.size() > 1) b.verdict("exponent_ordering", r.ordering_margin, ">", 0.0);
  b.verdict("determinant_consistency", r.determinant_error, "<=", r.determinant_tolerance, "tolerances.determinant");
  b.verdict("assembled_conformality", r.assembled_defect, "<=", cfg.tolerances.conformality, "tolerances.conformality");
  b.verdict("bundle_orthogonality", r.bundle_orthogonality, "<=", cfg.tolerances.reduction.orthogonality_defect,
            "tolerances.orthogonality_defect");
}

void sweep_epsilon(Builder& b, const ExperimentConfig& cfg, const RunOptions& options, const std::vector<double>& values) {
  const auto samples = samples_for(cfg);
  std::vector<ReductionResult> runs;
  Json rows = Json::array();
  std::string csv =
      "value,perturbation_size,perturbation_bound,invariance_residual,orthogonality_defect,max_slack,max_truncation,"
      "diff_prev,continuity_bound\n";
  bool monotone = true;
  double worst_continuity = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < values.size(); ++j) {
    NormConfig norm = cfg.norm;
    norm.epsilon = values[j];
    runs.push_back(b.stage("reduce[" + std::to_string(j) + "]", [&] {
      return reduce(cfg.cocycle, cfg.dynamics, norm, samples, reduce_options(cfg, options));
    }));
    const auto& r = runs.back();
    const auto iso = isometric_conjugate(r);
    std::int64_t max_trunc = 0;
    for (const auto& p : r.points) max_trunc = std::max(max_trunc, p.r.truncation_used);
    double diff = std::numeric_limits<double>::quiet_NaN();
    double bound = std::numeric_limits<double>::quiet_NaN();
    if (j > 0) {
      const auto& prev = runs[j - 1];
      diff = 0.0;
      for (std::size_t i = 0; i < r.points.size(); ++i) {
        diff = std::max(diff, operator_norm(r.points[i].a_tilde - prev.points[i].a_tilde));
      }
      const double a_norm = std::max(r.diagnostics.max_a_norm, prev.diagnostics.max_a_norm);
      bound = 3.0 * a_norm * std::abs(std::exp(values[j]) - std::exp(values[j - 1]));
      worst_continuity = std::max(worst_continuity, diff - bound);
      const double dp = r.diagnostics.perturbation_size - prev.diagnostics.perturbation_size;
      const double de = values[j] - values[j - 1];
      monotone = monotone && de != 0.0 && (dp > 0.0) == (de > 0.0) && dp != 0.0;
    }
    rows.push_back(Json{{"value", values[j]},
                        {"perturbation_size", r.diagnostics.perturbation_size},
                        {"perturbation_bound", r.diagnostics.perturbation_bound},
                        {"invariance_residual", r.diagnostics.invariance_residual},
                        {"orthogonality_defect", iso.worst_defect},
                        {"max_slack", r.diagnostics.max_slack},
                        {"max_truncation", max_trunc},
                        {"diff_prev", j > 0 ? Json(diff) : Json(nullptr)},
                        {"continuity_bound", j > 0 ? Json(bound) : Json(nullptr)}});
    csv += csv_number(values[j]) + "," + csv_number(r.diagnostics.perturbation_size) + "," +
           csv_number(r.diagnostics.perturbation_bound) + "," + csv_number(r.diagnostics.invariance_residual) + "," +
           csv_number(iso.worst_defect) + "," + csv_number(r.diagnostics.max_slack) + "," + std::to_string(max_trunc) +
           "," + (j > 0 ? csv_number(diff) : "") + "," + (j > 0 ? csv_number(bound) : "") + "\n";
    reduction_verdicts(b, r, "epsilon[" + std::to_string(j) + "].");
  }
  b.stages()["sweep"] = Json{{"param", "epsilon"}, {"rows", rows}};
  b.csv("sweep.csv", csv);
  b.check("perturbation_monotone", monotone);
  // Each successive A~ difference minus 3 ||A|| |e^{eps_j} - e^{eps_{j+1}}|.
  b.verdict("continuity", worst_continuity, "<=", 0.0);
}

void sweep_horizon(Builder& b, const ExperimentConfig& cfg, const std::vector<double>& values) {
  const int d = cfg.cocycle.dim();
  Json rows = Json::array();
  std::string csv = "value";
  for (int i = 1; i < d; ++i) csv += ",slope_" + std::to_string(i);
  for (int i = 1; i < d; ++i) csv += ",dominated_" + std::to_string(i);
  csv += ",max_slope_change\n";
  std::vector<double> prev;
  for (std::size_t j = 0; j < values.size(); ++j) {
    const double v = values[j];
    if (v < 1 || v != std::floor(v)) throw ConfigError("sweep.values: horizons must be positive integers");
    const auto horizons = doubling_schedule(static_cast<std::int64_t>(v));
    const auto g = b.stage("gap_profile[" + std::to_string(j) + "]", [&] {
      return gap_profile(cfg.cocycle, cfg.dynamics, horizons, cfg.sampling.count, cfg.sampling.seed,
                         cfg.splitting.slope_threshold);
    });
    double change = std::numeric_limits<double>::quiet_NaN();
    if (!prev.empty()) {
      change = 0.0;
      for (std::size_t i = 0; i < g.slopes.size(); ++i) change = std::max(change, std::abs(g.slopes[i] - prev[i]));
    }
    rows.push_back(Json{{"value", v},
                        {"slopes", g.slopes},
                        {"dominated", g.dominated},
                        {"max_slope_change", prev.empty() ? Json(nullptr) : Json(change)}});
    csv += csv_number(v);
    for (const double s : g.slopes) csv += "," + csv_number(s);
    for (const bool f : g.dominated) csv += std::string(",") + (f ? "1" : "0");
    csv += "," + (prev.empty() ? std::string() : csv_number(change)) + "\n";
    prev = g.slopes;
  }
  b.stages()["sweep"] = Json{{"param", "horizon"}, {"rows", rows}};
  b.csv("sweep.csv", csv);
}

void cmd_sweep(Builder& b, const ExperimentConfig& cfg, const RunOptions& options) {
  if (!cfg.sweep) throw ConfigError("sweep needs sweep.param and sweep.values in the config or on the command line");
  const auto& s = *cfg.sweep;
  if (s.values.size() < 2) throw ConfigError("sweep.values: at least two values are required");
  if (s.param == "epsilon") {
    for (const double v : s.values) {
      if (!(v > 0.0)) throw ConfigError("sweep.values: epsilon values must be positive");
    }
    sweep_epsilon(b, cfg, options, s.values);
  } else if (s.param == "horizon") {
    sweep_horizon(b, cfg, s.values);
  } else {
    throw ConfigError("sweep.param: expected epsilon or horizon");
  }
}

}  // namespace

RunOutput run_command(std::string_view command, const ExperimentConfig& config, const RunOptions& options) {
  static const std::vector<std::string_view> known = {"exponents", "reduce", "conformalize", "split", "pipeline", "sweep"};
  if (std::find(known.begin(), known.end(), command) == known.end()) {
    throw ConfigError("unknown command '" + std::string(command) + "'");
  }
  Builder b(command, config, options);
  try {
    if (command == "exponents") cmd_exponents(b, config);
    if (command == "reduce") cmd_reduce(b, config, options);
    if (command == "conformalize") cmd_conformalize(b, config, options);
    if (command == "split") cmd_split(b, config, options);
    if (command == "pipeline") cmd_pipeline(b, config, options);
    if (command == "sweep") cmd_sweep(b, config, options);
  } catch (const Error& e) {
    b.fail(e);
  }
  return b.finish();
}

std::string report_text(const Json& report) { return report.dump(2) + "\n"; }

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_outputs(const RunOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_atomic(dir / "report.json", report_text(out.report));
  write_atomic(dir / "timings.json", out.timings.dump(2) + "\n");
  for (const auto& [name, contents] : out.csv) write_atomic(dir / name, contents);
}

}  // namespace cocyclekit
