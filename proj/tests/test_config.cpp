#include "support.hpp"

#include "cocyclekit/config.hpp"

using namespace cocyclekit;

namespace {

std::string error_of(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("a minimal config fills and echoes every default") {
  const auto cfg = parse_config(R"({"base": {"kind": "periodic", "period": 1},
                                    "cocycle": {"kind": "constant", "matrix": [[1, 1], [0, 1]]}})");
  CHECK(cfg.dynamics.is_periodic());
  CHECK(cfg.cocycle.dim() == 2);
  CHECK(cfg.norm.epsilon == 0.5);
  CHECK(cfg.tolerances.gap == 1e-9);
  const auto& e = cfg.echo;
  for (const char* key : {"base", "cocycle", "norm", "sampling", "tolerances", "splitting", "output"}) {
    CHECK_MESSAGE(e.contains(key), key);
  }
  CHECK(e["tolerances"]["invariance_residual"] == 1e-10);
  CHECK(e["tolerances"]["gap"] == 1e-9);
  CHECK(e["norm"]["truncation"]["adaptive"] == 1e-8);
  CHECK(e["sampling"]["bundle_horizon"].is_null());
  CHECK(e["splitting"]["forced_partition"].is_null());
}

TEST_CASE("estimated bases default to the looser gap tolerance") {
  const auto cfg = parse_config(R"({"base": {"kind": "torus"},
                                    "cocycle": {"kind": "scalar_rotation", "angle": 0.5}})");
  CHECK(cfg.tolerances.gap == 1e-3);
  CHECK(cfg.echo["base"]["shift"] == "golden");
  CHECK(cfg.dynamics.uniquely_ergodic());
}

TEST_CASE("missing and unknown fields are named") {
  CHECK(error_of(R"({"base": {}, "cocycle": {"kind": "constant", "matrix": [[1]]}})").find("base.kind") !=
        std::string::npos);
  CHECK(error_of(R"({"cocycle": {"kind": "constant", "matrix": [[1]]}})").find("base") != std::string::npos);
  const auto unknown = error_of(R"({"base": {"kind": "periodic", "period": 1, "perod": 2},
                                    "cocycle": {"kind": "constant", "matrix": [[1]]}})");
  CHECK(unknown.find("base.perod") != std::string::npos);
  CHECK(unknown.find("unknown key") != std::string::npos);
  const auto nested = error_of(R"({"base": {"kind": "torus"}, "cocycle": {"kind": "block_diagonal",
      "blocks": [{"kind": "constant", "matrix": [[1]]}, {"kind": "constant"}]}})");
  CHECK(nested.find("cocycle.blocks[1].matrix") != std::string::npos);
}

TEST_CASE("syntax errors carry line and column") {
  const auto msg = error_of("{\n  \"base\": {\"kind\": \"periodic\",}\n}");
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(msg.find("column") != std::string::npos);
}

TEST_CASE("value validation") {
  const std::string head = R"({"base": {"kind": "periodic", "period": 1}, "cocycle": {"kind": "constant", "matrix": [[1, 0], [0, 1]]}, )";
  CHECK(error_of(head + R"("norm": {"epsilon": -1}})").find("norm.epsilon") != std::string::npos);
  CHECK(error_of(head + R"("splitting": {"forced_partition": [1, 2]}})").find("forced_partition") !=
        std::string::npos);
  CHECK(error_of(head + R"("sweep": {"param": "tau", "values": [1, 2]}})").find("sweep.param") != std::string::npos);
  CHECK(error_of(head + R"("norm": {"truncation": {"fixed": 3, "adaptive": 1e-8}}})").find("norm.truncation") !=
        std::string::npos);
  CHECK(error_of(R"({"base": {"kind": "periodic", "period": 1}, "cocycle": {"kind": "constant", "matrix": [[1, 0], [0]]}})")
            .find("cocycle.matrix") != std::string::npos);
  // Singular generators are caught at evaluation, named by their path.
  CHECK(error_of(R"({"base": {"kind": "periodic", "period": 1}, "cocycle": {"kind": "conjugated", "conjugator": [[1, 1], [1, 1]], "inner": {"kind": "constant", "matrix": [[1, 0], [0, 1]]}}})")
            .find("cocycle") != std::string::npos);
}

TEST_CASE("comments are allowed and overrides update the echo") {
  auto cfg = parse_config(R"({
    // fixed point
    "base": {"kind": "periodic", "period": 1},
    "cocycle": {"kind": "constant", "matrix": [[1, 1], [0, 1]]},
    "sampling": {"seed": 4}
  })");
  CHECK(cfg.sampling.seed == 4);
  cfg.set_seed(9);
  CHECK(cfg.sampling.seed == 9);
  CHECK(cfg.echo["sampling"]["seed"] == 9);
  cfg.set_sweep(SweepConfig{"epsilon", {0.5, 0.2}});
  CHECK(cfg.echo["sweep"]["values"].size() == 2);
}

TEST_CASE("every generator kind parses") {
  const auto cfg = parse_config(R"({
    "base": {"kind": "torus", "shift": [0.1, 0.7071067811865476]},
    "cocycle": {"kind": "block_diagonal", "blocks": [
      {"kind": "schrodinger", "energy": 1.2, "coupling": 0.5},
      {"kind": "scaled", "log_factor": {"cos": [0.5]}, "inner": {"kind": "scalar_rotation", "dim": 2, "angle": {"constant": 0.2, "sin": [0.1, 0.05]}}},
      {"kind": "conjugated", "conjugator": [[2]], "inner": {"kind": "constant", "matrix": [[3]]}}
    ]}
  })");
  CHECK(cfg.cocycle.dim() == 5);
  const auto shift = parse_config(R"({"base": {"kind": "shift", "alphabet": 2, "center": [0, 1, 1], "left_tail": [0], "right_tail": [1]},
                                      "cocycle": {"kind": "per_symbol", "matrices": [[[2]], [[0.5]]]}})");
  CHECK_FALSE(shift.dynamics.uniquely_ergodic());
  const auto orbit = parse_config(R"({"base": {"kind": "periodic", "period": 2},
                                      "cocycle": {"kind": "per_orbit_point", "matrices": [[[2]], [[0.5]]]}})");
  CHECK(orbit.dynamics.period() == 2);
}
