#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "cocyclekit/parallel.hpp"
#include "cocyclekit/runner.hpp"

namespace ck = cocyclekit;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool full = false;
  bool strict = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "Directory for report.json, timings.json and CSV series");
  sub->add_option("--seed", c.seed, "Override sampling.seed");
  sub->add_flag("--full", c.full, "Include per-point matrices in the report");
  sub->add_flag("--strict", c.strict, "Use one common fixed truncation for every Gram matrix");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reducible cocycles: Lyapunov metrics, isometric and conformal reductions, dominated splittings"};
  app.require_subcommand(1, 1);
  app.footer(std::string("Worker threads are taken from ") + ck::kThreadsEnv + " (default: hardware concurrency).");

  Common common;
  std::string mode;
  std::string param;
  std::vector<double> values;

  auto* exponents = app.add_subcommand("exponents", "Upper and lower exponent bounds and product-boundedness");
  auto* reduce = app.add_subcommand("reduce", "Metric-preserving perturbation and its conjugates");
  auto* conformalize = app.add_subcommand("conformalize", "Conformal perturbation");
  auto* split = app.add_subcommand("split", "Gap profile, dominated bundles and adapted metric");
  auto* pipeline = app.add_subcommand("pipeline", "Conformal splitting pipeline");
  auto* sweep = app.add_subcommand("sweep", "Repeat a stage across a parameter grid");
  for (auto* sub : {exponents, reduce, conformalize, split, pipeline, sweep}) add_common(sub, common);
  conformalize->add_option("--mode", mode, "Exponent rescaling")->required()->check(CLI::IsMember({"constant", "function"}));
  pipeline->add_option("--mode", mode, "Base hypothesis")
      ->required()
      ->check(CLI::IsMember({"uniquely-ergodic", "minimal"}));
  sweep->add_option("--param", param, "Swept parameter")->check(CLI::IsMember({"epsilon", "horizon"}));
  sweep->add_option("--values", values, "Grid values (overrides sweep.values)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ck::kExitOk : ck::kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto cfg = ck::load_config(common.config);
    if (common.seed) cfg.set_seed(*common.seed);
    if (common.full) cfg.set_full(true);
    if (command == "sweep" && (!param.empty() || !values.empty())) {
      ck::SweepConfig s = cfg.sweep.value_or(ck::SweepConfig{});
      if (!param.empty()) s.param = param;
      if (!values.empty()) s.values = values;
      cfg.set_sweep(std::move(s));
    }
    const auto out = ck::run_command(command, cfg, ck::RunOptions{mode, common.strict});
    std::string dir = common.out.empty() ? cfg.output_dir.value_or("") : common.out;
    if (dir.empty()) {
      std::cout << ck::report_text(out.report);
    } else {
      ck::write_outputs(out, dir);
    }
    if (out.report.contains("error")) {
      std::cerr << "error in stage " << out.report["error"]["stage"].get<std::string>() << ": "
                << out.report["error"]["message"].get<std::string>() << "\n";
    } else if (out.exit_code == ck::kExitInvariantFailure) {
      for (const auto& v : out.report["verdicts"]) {
        if (!v["passed"].get<bool>()) std::cerr << "FAILED " << v["name"].get<std::string>() << "\n";
      }
    }
    return out.exit_code;
  } catch (const ck::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ck::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ck::kExitNumerical;
  }
}
