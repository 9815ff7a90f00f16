#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cocyclekit/reduction.hpp"
#include "cocyclekit/runner.hpp"

namespace py = pybind11;
namespace ck = cocyclekit;

namespace {

ck::PositiveMatrix positive(const ck::Matrix& m) { return ck::PositiveMatrix(m); }

// Leaked on purpose: the translator may run during interpreter shutdown.
py::exception<ck::Error>* numerical_error = nullptr;
py::exception<ck::ConfigError>* config_error = nullptr;

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Compiled core of cocyclekit";

  numerical_error = new py::exception<ck::Error>(m, "NumericalError", PyExc_RuntimeError);
  config_error = new py::exception<ck::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ck::Error& e) {
      // Attach the error kind so callers can branch on it.
      py::object err = py::handle(numerical_error->ptr())(e.what());
      err.attr("kind") = std::string(ck::to_string(e.kind()));
      err.attr("value") = e.value();
      py::set_error(*numerical_error, err);
    } catch (const ck::ConfigError& e) {
      py::set_error(*config_error, e.what());
    }
  });

  m.def("psd_sqrt", [](const ck::Matrix& p) { return ck::psd_sqrt(positive(p)).matrix(); }, py::arg("p"),
        "Positive square root of a symmetric positive-definite matrix.");
  m.def("solve_positive",
        [](const ck::Matrix& q, const ck::Matrix& r) { return ck::solve_positive(positive(q), positive(r)).matrix(); },
        py::arg("q"), py::arg("r"), "Unique positive P with P^T Q P = R.");
  m.def("invariance_residual", &ck::invariance_residual, py::arg("p"), py::arg("q"), py::arg("r"));
  m.def(
      "loewner_margin",
      [](const ck::Matrix& b, const ck::Matrix& c) {
        return ck::loewner_less(ck::SymmetricMatrix(b), ck::SymmetricMatrix(c)).margin;
      },
      py::arg("b"), py::arg("c"), "Min eigenvalue of C - B; positive iff B < C.");
  m.def("operator_norm", &ck::operator_norm, py::arg("m"));
  m.def("mininorm", &ck::mininorm, py::arg("m"));
  m.def("orthogonality_defect", &ck::orthogonality_defect, py::arg("m"));
  m.def("max_principal_angle", &ck::max_principal_angle, py::arg("a"), py::arg("b"));

  m.def(
      "run",
      [](const std::string& command, const std::string& config_text, const std::string& mode, bool strict,
         std::optional<std::uint64_t> seed) {
        auto cfg = ck::parse_config(config_text);
        if (seed) cfg.set_seed(*seed);
        ck::RunOutput out;
        {
          py::gil_scoped_release release;
          out = ck::run_command(command, cfg, ck::RunOptions{mode, strict});
        }
        return py::make_tuple(ck::report_text(out.report), out.exit_code);
      },
      py::arg("command"), py::arg("config_text"), py::arg("mode") = "", py::arg("strict") = false,
      py::arg("seed") = py::none(), "Run a command on a JSON config; returns (report JSON text, exit code).");
}
