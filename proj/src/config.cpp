#include "cocyclekit/config.hpp"

#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace cocyclekit {

namespace {

/// A JSON object being validated: tracks consumed keys, builds the echo.
class Node {
 public:
  Node(const Json& value, std::string path) : value_(value), path_(std::move(path)) {
    if (!value_.is_object()) fail_self("expected an object");
  }

  const std::string& path() const { return path_; }
  Json& echo() { return echo_; }

  std::string key_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  [[noreturn]] void fail(std::string_view key, const std::string& what) const {
    throw ConfigError(key_path(key) + ": " + what);
  }
  [[noreturn]] void fail_self(const std::string& what) const {
    throw ConfigError((path_.empty() ? std::string("config") : path_) + ": " + what);
  }

  bool has(std::string_view key) const { return value_.contains(std::string(key)); }

  const Json& take(std::string_view key) {
    const std::string k(key);
    if (!value_.contains(k)) fail(key, "required field is missing");
    used_.insert(k);
    return value_.at(k);
  }

  double number(std::string_view key, std::optional<double> fallback = std::nullopt) {
    double v;
    if (!has(key) && fallback) {
      v = *fallback;
    } else {
      const Json& j = take(key);
      if (!j.is_number()) fail(key, "expected a number");
      v = j.get<double>();
      if (!std::isfinite(v)) fail(key, "expected a finite number");
    }
    echo_[std::string(key)] = v;
    return v;
  }

  double positive(std::string_view key, std::optional<double> fallback = std::nullopt) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) fail(key, "must be positive");
    return v;
  }

  std::int64_t integer(std::string_view key, std::optional<std::int64_t> fallback = std::nullopt,
                       std::int64_t min = std::numeric_limits<std::int64_t>::min()) {
    std::int64_t v;
    if (!has(key) && fallback) {
      v = *fallback;
    } else {
      v = as_integer(take(key), key_path(key));
    }
    if (v < min) fail(key, "must be >= " + std::to_string(min));
    echo_[std::string(key)] = v;
    return v;
  }

  std::uint64_t unsigned_integer(std::string_view key, std::uint64_t fallback) {
    std::uint64_t v = fallback;
    if (has(key)) {
      const Json& j = take(key);
      if (!j.is_number_unsigned()) fail(key, "expected a non-negative integer");
      v = j.get<std::uint64_t>();
    }
    echo_[std::string(key)] = v;
    return v;
  }

  bool boolean(std::string_view key, bool fallback) {
    bool v = fallback;
    if (has(key)) {
      const Json& j = take(key);
      if (!j.is_boolean()) fail(key, "expected true or false");
      v = j.get<bool>();
    }
    echo_[std::string(key)] = v;
    return v;
  }

  std::string string(std::string_view key, const std::vector<std::string>& allowed,
                     std::optional<std::string> fallback = std::nullopt) {
    std::string v;
    if (!has(key) && fallback) {
      v = *fallback;
    } else {
      const Json& j = take(key);
      if (!j.is_string()) fail(key, "expected a string");
      v = j.get<std::string>();
    }
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(key, "unknown value '" + v + "' (expected one of: " + list + ")");
    }
    echo_[std::string(key)] = v;
    return v;
  }

  /// Runs fn on the child object and stores its echo under key.
  void object(std::string_view key, const std::function<void(Node&)>& fn, bool required = false) {
    static const Json kEmpty = Json::object();
    const Json& j = (required || has(key)) ? take(key) : kEmpty;
    Node child(j, key_path(key));
    fn(child);
    child.finish();
    echo_[std::string(key)] = std::move(child.echo_);
  }

  void finish() const {
    for (const auto& [k, v] : value_.items()) {
      if (!used_.count(k)) throw ConfigError(key_path(k) + ": unknown key");
    }
  }

  static std::int64_t as_integer(const Json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return j.get<std::int64_t>();
  }

 private:
  const Json& value_;
  std::string path_;
  std::set<std::string> used_;
  Json echo_ = Json::object();
};

std::vector<double> number_list(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

std::vector<int> int_list(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(static_cast<int>(Node::as_integer(j[i], where + "[" + std::to_string(i) + "]")));
  }
  return out;
}

Matrix matrix_value(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty array of rows");
  const std::size_t n = j.size();
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = number_list(j[r], where + "[" + std::to_string(r) + "]");
    if (row.size() != n) throw ConfigError(where + ": matrix must be square (row " + std::to_string(r) + ")");
    for (std::size_t c = 0; c < n; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<Matrix> matrix_list(Node& node, std::string_view key) {
  const Json& j = node.take(key);
  const std::string where = node.key_path(key);
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty array of matrices");
  std::vector<Matrix> out;
  Json echo = Json::array();
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(matrix_value(j[i], where + "[" + std::to_string(i) + "]"));
    echo.push_back(matrix_json(out.back()));
  }
  node.echo()[std::string(key)] = std::move(echo);
  return out;
}

TrigSum trig(Node& node, std::string_view key, std::optional<double> fallback = std::nullopt) {
  if (!node.has(key) && fallback) {
    node.echo()[std::string(key)] = *fallback;
    return TrigSum{*fallback, {}, {}};
  }
  const Json& j = node.take(key);
  if (j.is_number()) {
    node.echo()[std::string(key)] = j.get<double>();
    return TrigSum{j.get<double>(), {}, {}};
  }
  TrigSum t;
  Node child(j, node.key_path(key));
  t.constant = child.number("constant", 0.0);
  if (child.has("cos")) t.cos = number_list(child.take("cos"), child.key_path("cos"));
  if (child.has("sin")) t.sin = number_list(child.take("sin"), child.key_path("sin"));
  child.echo()["cos"] = t.cos;
  child.echo()["sin"] = t.sin;
  child.finish();
  node.echo()[std::string(key)] = std::move(child.echo());
  return t;
}

CocycleSpec cocycle_value(Node& node) {
  const std::string kind = node.string(
      "kind", {"constant", "per_orbit_point", "schrodinger", "scalar_rotation", "per_symbol", "block_diagonal",
               "scaled", "conjugated"});
  try {
    if (kind == "constant") {
      const Matrix m = matrix_value(node.take("matrix"), node.key_path("matrix"));
      node.echo()["matrix"] = matrix_json(m);
      return CocycleSpec::constant(m);
    }
    if (kind == "per_orbit_point") return CocycleSpec::per_orbit_point(matrix_list(node, "matrices"));
    if (kind == "per_symbol") return CocycleSpec::per_symbol(matrix_list(node, "matrices"));
    if (kind == "schrodinger") {
      const double e = node.number("energy");
      const double k = node.number("coupling", 0.0);
      return CocycleSpec::schrodinger(e, k);
    }
    if (kind == "scalar_rotation") {
      const auto dim = node.integer("dim", 2, 1);
      TrigSum log_scale = trig(node, "log_scale", 0.0);
      TrigSum angle = trig(node, "angle", 0.0);
      return CocycleSpec::scalar_times_rotation(static_cast<int>(dim), std::move(log_scale), std::move(angle));
    }
    if (kind == "block_diagonal") {
      const Json& j = node.take("blocks");
      const std::string where = node.key_path("blocks");
      if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty array of cocycles");
      std::vector<CocycleSpec> blocks;
      Json echo = Json::array();
      for (std::size_t i = 0; i < j.size(); ++i) {
        Node child(j[i], where + "[" + std::to_string(i) + "]");
        blocks.push_back(cocycle_value(child));
        child.finish();
        echo.push_back(std::move(child.echo()));
      }
      node.echo()["blocks"] = std::move(echo);
      return CocycleSpec::block_diagonal(std::move(blocks));
    }
    if (kind == "scaled") {
      const TrigSum f = trig(node, "log_factor");
      CocycleSpec inner;
      node.object("inner", [&](Node& c) { inner = cocycle_value(c); }, true);
      return CocycleSpec::scaled([f](const BasePoint& x) { return f(phase(x)); }, std::move(inner));
    }
    const Matrix m = matrix_value(node.take("conjugator"), node.key_path("conjugator"));
    node.echo()["conjugator"] = matrix_json(m);
    CocycleSpec inner;
    node.object("inner", [&](Node& c) { inner = cocycle_value(c); }, true);
    return CocycleSpec::conjugated(m, std::move(inner));
  } catch (const Error& e) {
    node.fail_self(e.what());
  }
}

BaseDynamics base_value(Node& node) {
  const std::string kind = node.string("kind", {"torus", "periodic", "shift"});
  try {
    if (kind == "torus") {
      TorusTranslation t;
      if (!node.has("shift")) {
        t.shift = {kGoldenShift};
        node.echo()["shift"] = "golden";
      } else if (const Json& j = node.take("shift"); j.is_string()) {
        if (j.get<std::string>() != "golden") node.fail("shift", "expected an array of numbers or \"golden\"");
        t.shift = {kGoldenShift};
        node.echo()["shift"] = "golden";
      } else {
        t.shift = number_list(j, node.key_path("shift"));
        node.echo()["shift"] = t.shift;
      }
      t.irrational = node.boolean("irrational", true);
      return BaseDynamics(t);
    }
    if (kind == "periodic") return BaseDynamics(PeriodicOrbit{node.integer("period", std::nullopt, 1)});
    FullShift s;
    s.alphabet = static_cast<int>(node.integer("alphabet", 2, 2));
    s.point.center = int_list(node.take("center"), node.key_path("center"));
    node.echo()["center"] = s.point.center;
    s.origin = node.integer("origin", 0, 0);
    for (const char* key : {"left_tail", "right_tail"}) {
      auto& dest = std::string(key) == "left_tail" ? s.point.left_tail : s.point.right_tail;
      if (node.has(key)) dest = int_list(node.take(key), node.key_path(key));
      node.echo()[key] = dest;
    }
    s.sample_radius = node.integer("sample_radius", 16, 0);
    return BaseDynamics(std::move(s));
  } catch (const Error& e) {
    node.fail_self(e.what());
  }
}

std::string line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  // The parser reports the byte after the offending character.
  return "line " + std::to_string(line) + ", column " + std::to_string(col > 1 ? col - 1 : col);
}

}  // namespace

void ExperimentConfig::set_seed(std::uint64_t seed) {
  sampling.seed = seed;
  echo["sampling"]["seed"] = seed;
}

void ExperimentConfig::set_full(bool value) {
  full = value;
  echo["output"]["full"] = value;
}

void ExperimentConfig::set_sweep(SweepConfig s) {
  echo["sweep"] = Json{{"param", s.param}, {"values", s.values}};
  sweep = std::move(s);
}

ExperimentConfig parse_config(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const Json::parse_error& e) {
    std::string what = e.what();
    if (const auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
    throw ConfigError("config parse error at " + line_column(text, e.byte) + ": " + what);
  }

  ExperimentConfig cfg;
  Node top(root, "");
  if (top.has("description")) top.string("description", {});
  top.object("base", [&](Node& n) { cfg.dynamics = base_value(n); }, true);
  top.object("cocycle", [&](Node& n) { cfg.cocycle = cocycle_value(n); }, true);

  top.object("norm", [&](Node& n) {
    cfg.norm.epsilon = n.positive("epsilon", 0.5);
    if (n.has("truncation")) {
      n.object("truncation", [&](Node& t) {
        if (t.has("adaptive") == t.has("fixed")) t.fail_self("give exactly one of 'adaptive' (tau) or 'fixed' (N)");
        if (t.has("adaptive")) {
          cfg.norm.truncation = AdaptiveTruncation{t.positive("adaptive")};
        } else {
          cfg.norm.truncation = FixedTruncation{t.integer("fixed", std::nullopt, 1)};
        }
      });
    } else {
      n.echo()["truncation"] = Json{{"adaptive", AdaptiveTruncation{}.tau}};
    }
    cfg.norm.max_terms = n.integer("max_terms", cfg.norm.max_terms, 1);
    cfg.norm.divergence_window = n.integer("divergence_window", cfg.norm.divergence_window, 1);
    try {
      cfg.norm.validate();
    } catch (const Error& e) {
      n.fail_self(e.what());
    }
  });

  top.object("sampling", [&](Node& n) {
    auto& s = cfg.sampling;
    s.count = static_cast<std::size_t>(n.integer("count", static_cast<std::int64_t>(s.count), 1));
    s.seed = n.unsigned_integer("seed", s.seed);
    s.horizon = n.integer("horizon", s.horizon, 2);
    s.exponent_samples =
        static_cast<std::size_t>(n.integer("exponent_samples", static_cast<std::int64_t>(s.exponent_samples), 1));
    if (n.has("gap_horizons")) {
      const Json& j = n.take("gap_horizons");
      const std::string where = n.key_path("gap_horizons");
      if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty array of integers");
      s.gap_horizons.clear();
      for (std::size_t i = 0; i < j.size(); ++i) {
        const auto h = Node::as_integer(j[i], where + "[" + std::to_string(i) + "]");
        if (h < 1 || (!s.gap_horizons.empty() && h <= s.gap_horizons.back())) {
          throw ConfigError(where + ": horizons must be positive and strictly increasing");
        }
        s.gap_horizons.push_back(h);
      }
    }
    n.echo()["gap_horizons"] = s.gap_horizons;
    if (n.has("bundle_horizon")) {
      s.bundle_horizon = n.integer("bundle_horizon", std::nullopt, 1);
    } else {
      n.echo()["bundle_horizon"] = nullptr;
    }
  });

  top.object("tolerances", [&](Node& n) {
    auto& t = cfg.tolerances;
    t.reduction.invariance_residual = n.positive("invariance_residual", t.reduction.invariance_residual);
    t.reduction.orthogonality_defect = n.positive("orthogonality_defect", t.reduction.orthogonality_defect);
    t.reduction.metric_preservation = n.positive("metric_preservation", t.reduction.metric_preservation);
    t.reduction.test_vectors =
        static_cast<std::size_t>(n.integer("test_vectors", static_cast<std::int64_t>(t.reduction.test_vectors), 1));
    t.conformality = n.positive("conformality", t.conformality);
    t.spectrum = n.positive("spectrum", t.spectrum);
    t.angle = n.positive("angle", t.angle);
    t.frame = n.positive("frame", t.frame);
    t.determinant = n.positive("determinant", t.determinant);
    t.gap = n.positive("gap", cfg.dynamics.is_periodic() ? 1e-9 : 1e-3);
    t.exponent_order = n.positive("exponent_order", t.exponent_order);
  });

  top.object("splitting", [&](Node& n) {
    cfg.splitting.slope_threshold = n.positive("slope_threshold", cfg.splitting.slope_threshold);
    if (n.has("forced_partition")) {
      auto p = int_list(n.take("forced_partition"), n.key_path("forced_partition"));
      const int sum = std::accumulate(p.begin(), p.end(), 0);
      if (p.empty() || sum != cfg.cocycle.dim() || std::any_of(p.begin(), p.end(), [](int v) { return v < 1; })) {
        n.fail("forced_partition", "must be positive dimensions summing to " + std::to_string(cfg.cocycle.dim()));
      }
      n.echo()["forced_partition"] = p;
      cfg.splitting.forced_partition = std::move(p);
    } else {
      n.echo()["forced_partition"] = nullptr;
    }
  });

  if (top.has("sweep")) {
    top.object("sweep", [&](Node& n) {
      SweepConfig s;
      s.param = n.string("param", {"epsilon", "horizon"});
      s.values = number_list(n.take("values"), n.key_path("values"));
      n.echo()["values"] = s.values;
      cfg.sweep = std::move(s);
    });
  }

  top.object("output", [&](Node& n) {
    if (n.has("dir")) cfg.output_dir = n.string("dir", {});
    cfg.full = n.boolean("full", false);
  });
  top.finish();
  cfg.echo = std::move(top.echo());
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace cocyclekit
