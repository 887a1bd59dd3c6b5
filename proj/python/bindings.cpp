#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mfoc/fixed_point.hpp"
#include "mfoc/particles.hpp"
#include "mfoc/runner.hpp"

namespace py = pybind11;
using namespace mfoc;

namespace {

ScalarField field_from_array(const TorusGrid& g, py::array_t<double> a) {
  auto buf = a.request();
  if (static_cast<std::size_t>(buf.size) != g.size())
    throw std::invalid_argument("array size does not match the grid");
  ScalarField f(g);
  const double* src = static_cast<const double*>(buf.ptr);
  std::copy(src, src + buf.size, f.values.begin());
  return f;
}

py::array_t<double> array_from_field(const ScalarField& f) {
  return py::array_t<double>(static_cast<py::ssize_t>(f.values.size()),
                             f.values.data());
}

}  // namespace

PYBIND11_MODULE(_mfoc, m) {
  m.doc() = "solver for the coupled forward-backward control system on the torus";

  py::class_<TorusGrid>(m, "TorusGrid")
      .def(py::init<int, int>(), py::arg("d"), py::arg("n"))
      .def_readonly("d", &TorusGrid::d)
      .def_readonly("n", &TorusGrid::n)
      .def_readonly("h", &TorusGrid::h)
      .def("size", &TorusGrid::size);

  py::class_<ScalarField>(m, "ScalarField")
      .def(py::init(&field_from_array), py::arg("grid"), py::arg("values"))
      .def_property_readonly("grid", [](const ScalarField& f) { return f.grid; })
      .def_property_readonly("values", &array_from_field);

  m.def("convolve", &convolve, py::arg("kernel"), py::arg("f"));
  m.def("heat_semigroup", &heat_semigroup, py::arg("f"), py::arg("t"));
  m.def("mollify", &mollify, py::arg("f"), py::arg("eps"));
  m.def("integrate", &integrate);
  m.def("sup_norm", py::overload_cast<const ScalarField&>(&sup_norm));
  m.def("l2_norm", &l2_norm);
  m.def("laplacian", &laplacian);
  m.def(
      "gradient",
      [](const ScalarField& f) {
        VectorField g = gradient(f);
        std::vector<py::array_t<double>> out;
        for (const auto& c : g.comp) out.push_back(array_from_field(c));
        return out;
      },
      py::arg("f"));
  m.def(
      "wasserstein1",
      [](const ScalarField& a, const ScalarField& b) { return wasserstein1(a, b); },
      py::arg("a"), py::arg("b"));

  m.def("run", &run, py::arg("config_path"),
        "full pipeline; returns the process exit code");
  m.def("validate", &run_validate, py::arg("config_path"));

  m.def(
      "solve_config",
      [](const std::string& path) {
        RunConfig cfg = load_config(path);
        SolveResult res = solve(cfg.problem, cfg.solver.theta, cfg.solver.tol,
                                cfg.solver.max_iter);
        CostReport cost = evaluate_cost(cfg.problem, res.pair);
        py::dict out;
        out["converged"] = res.pair.converged;
        out["iterations"] = res.pair.iterations;
        out["final_residual"] = res.pair.final_residual;
        out["phi_initial"] = array_from_field(res.pair.Phi.at(0));
        out["rho_final"] = array_from_field(res.pair.rho.final());
        out["cost_total"] = cost.total;
        return out;
      },
      py::arg("config_path"),
      "load a config, run the fixed-point solver and return a summary dict");
}
