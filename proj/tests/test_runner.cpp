#include "support.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cocyclekit/runner.hpp"

using namespace cocyclekit;

namespace {

ExperimentConfig example(const std::string& name) {
  return load_config(std::filesystem::path(COCYCLEKIT_CONFIG_DIR) / name);
}

/// Walks a dotted path like "tolerances.gap" through the echoed config.
const Json* lookup(const Json& j, const std::string& path) {
  const Json* cur = &j;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
  }
  return cur;
}

}  // namespace

TEST_CASE("reduce on the shear passes every verdict") {
  const auto out = run_command("reduce", example("shear_eps05.json"), {});
  CHECK(out.exit_code == kExitOk);
  CHECK(out.report["passed"] == true);
  bool saw_modulus = false;
  for (const auto& v : out.report["verdicts"]) {
    CHECK_MESSAGE(v["passed"] == true, v["name"].get<std::string>());
    saw_modulus = saw_modulus || v["name"] == "eigenvalue_modulus";
  }
  CHECK(saw_modulus);
}

TEST_CASE("verdict tolerances are echoed with the same values") {
  const auto cfg = example("conformal_golden.json");
  const auto out = run_command("conformalize", cfg, RunOptions{"function", false});
  for (const auto& v : out.report["verdicts"]) {
    if (v["tolerance"].is_null()) continue;
    const Json* t = lookup(out.report["config"], v["tolerance"].get<std::string>());
    REQUIRE_MESSAGE(t != nullptr, v["tolerance"].get<std::string>());
    CHECK(*t == v["bound"]);
  }
}

TEST_CASE("reports are deterministic and keep timings out") {
  const auto cfg = example("rotation_golden.json");
  const auto a = run_command("split", cfg, {});
  const auto b = run_command("split", cfg, {});
  CHECK(report_text(a.report) == report_text(b.report));
  CHECK(report_text(a.report).find("seconds") == std::string::npos);
  CHECK(a.timings.contains("split"));
}

TEST_CASE("numerical stage errors are embedded with exit code 3") {
  const auto out = run_command("split", example("rotation_forced.json"), {});
  CHECK(out.exit_code == kExitNumerical);
  CHECK(out.report["passed"] == false);
  CHECK(out.report["error"]["kind"] == "increase-horizon");
  CHECK(out.report["error"]["stage"] == "split");
}

TEST_CASE("failed invariants give exit code 1") {
  auto cfg = parse_config(R"({"base": {"kind": "periodic", "period": 1},
                              "cocycle": {"kind": "constant", "matrix": [[1, 1], [0, 1]]},
                              "tolerances": {"invariance_residual": 1e-30}})");
  const auto out = run_command("reduce", cfg, {});
  CHECK(out.exit_code == kExitInvariantFailure);
  CHECK(out.report["passed"] == false);
}

TEST_CASE("usage errors throw") {
  const auto cfg = example("shear_eps05.json");
  CHECK_THROWS_AS(run_command("frobnicate", cfg, {}), ConfigError);
  CHECK_THROWS_AS(run_command("conformalize", cfg, {}), ConfigError);
  CHECK_THROWS_AS(run_command("pipeline", cfg, RunOptions{"ergodic", false}), ConfigError);
  CHECK_THROWS_AS(run_command("sweep", cfg, {}), ConfigError);
  auto one = cfg;
  one.set_sweep(SweepConfig{"epsilon", {0.5}});
  CHECK_THROWS_AS(run_command("sweep", one, {}), ConfigError);
}

TEST_CASE("epsilon sweep is monotone and continuous") {
  const auto out = run_command("sweep", example("shear_sweep.json"), {});
  CHECK(out.exit_code == kExitOk);
  REQUIRE(out.csv.size() == 1);
  CHECK(out.csv[0].first == "sweep.csv");
  CHECK(out.csv[0].second.rfind("value,perturbation_size,", 0) == 0);
  const auto& rows = out.report["stages"]["sweep"]["rows"];
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i]["perturbation_size"].get<double>() < rows[i - 1]["perturbation_size"].get<double>());
    CHECK(rows[i]["diff_prev"].get<double>() <= rows[i]["continuity_bound"].get<double>());
  }
}

TEST_CASE("horizon sweep slopes converge to log 4") {
  const auto out = run_command("sweep", example("hyperbolic_diag.json"), {});
  const auto& rows = out.report["stages"]["sweep"]["rows"];
  for (const auto& r : rows) CHECK(r["slopes"][0].get<double>() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("strict mode records a common truncation") {
  const auto out = run_command("reduce", example("shear_eps02.json"), RunOptions{"", true});
  CHECK(out.report["strict"] == true);
  CHECK(out.report["stages"]["reduction"]["common_truncation"].get<std::int64_t>() > 0);
  CHECK(out.exit_code == kExitOk);
}

TEST_CASE("outputs are written atomically into the directory") {
  const auto dir = std::filesystem::temp_directory_path() / "cocyclekit_runner_test";
  std::filesystem::remove_all(dir);
  const auto out = run_command("split", example("dominated_block.json"), {});
  write_outputs(out, dir);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "timings.json"));
  std::ifstream csv(dir / "gap_profile.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "horizon,index,min_ratio,log_min_ratio");
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    CHECK(e.path().string().find(".tmp") == std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("full reports carry per-point matrices") {
  auto cfg = example("shear_eps05.json");
  cfg.set_full(true);
  const auto out = run_command("reduce", cfg, {});
  const auto& p = out.report["stages"]["reduction"]["points"][0];
  CHECK(p.contains("a_tilde"));
  CHECK(p["a_tilde"].size() == 2);
  CHECK(p["a_tilde"][0].size() == 2);
}
