#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "blochbands/config.hpp"

namespace py = pybind11;
using namespace blochbands;

namespace {

std::vector<double> finest_eps(const GridHierarchy& h, const Permittivity& eps) {
  return sample_permittivity(h.finest(), eps);
}

py::dict operators_dict(const LevelOperators& lv) {
  py::dict d;
  d["A"] = lv.A.mat;
  d["M"] = lv.M.mat;
  d["L"] = lv.L;
  d["P"] = lv.P.mat;
  d["n"] = lv.grid.n;
  d["m"] = lv.grid.m;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Photonic band structures of 2D periodic media (edge elements, multigrid, block eigensolvers)";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<UnitCell>(m, "UnitCell")
      .def(py::init([](double a, double b) { return UnitCell{a, b}; }), py::arg("a") = 1.0, py::arg("b") = 1.0)
      .def_readwrite("a", &UnitCell::a)
      .def_readwrite("b", &UnitCell::b);

  py::class_<BlochParameter>(m, "BlochParameter")
      .def(py::init<double, double, const UnitCell&>(), py::arg("k1"), py::arg("k2"), py::arg("cell") = UnitCell{})
      .def_property_readonly("k1", &BlochParameter::k1)
      .def_property_readonly("k2", &BlochParameter::k2)
      .def_property_readonly("alpha", &BlochParameter::alpha)
      .def_property_readonly("beta", &BlochParameter::beta)
      .def("is_periodic", &BlochParameter::is_periodic)
      .def("__repr__", [](const BlochParameter& k) {
        std::ostringstream o;
        o << "BlochParameter(" << k.k1() << ", " << k.k2() << ")";
        return o.str();
      });

  py::class_<GridLevel>(m, "GridLevel")
      .def_readonly("n", &GridLevel::n)
      .def_readonly("m", &GridLevel::m)
      .def("num_edges", &GridLevel::num_edges)
      .def("num_nodes", &GridLevel::num_nodes);

  py::class_<GridHierarchy>(m, "GridHierarchy")
      .def_readonly("levels", &GridHierarchy::levels)
      .def("finest", &GridHierarchy::finest, py::return_value_policy::reference_internal)
      .def("__len__", &GridHierarchy::size);

  m.def("build_hierarchy", &build_hierarchy, py::arg("cell"), py::arg("n0"), py::arg("m0"), py::arg("refinements"));

  py::class_<ConstantPermittivity>(m, "ConstantPermittivity")
      .def(py::init([](double v) { return ConstantPermittivity{v}; }), py::arg("value") = 1.0)
      .def_readwrite("value", &ConstantPermittivity::value);
  py::class_<DiscPermittivity>(m, "DiscPermittivity")
      .def(py::init([](double cx, double cy, double r, double in, double out) {
             return DiscPermittivity{cx, cy, r, in, out};
           }),
           py::arg("cx"), py::arg("cy"), py::arg("radius"), py::arg("eps_inside"), py::arg("eps_outside") = 1.0)
      .def_readwrite("radius", &DiscPermittivity::radius)
      .def_readwrite("eps_inside", &DiscPermittivity::eps_inside)
      .def_readwrite("eps_outside", &DiscPermittivity::eps_outside);
  m.def("parse_permittivity", &parse_permittivity, py::arg("spec"), py::arg("cell") = UnitCell{});

  m.def(
      "level_operators",
      [](const GridHierarchy& h, const Permittivity& eps, const BlochParameter& k) {
        py::list out;
        for (const auto& lv : build_level_operators(h, finest_eps(h, eps), k)) out.append(operators_dict(lv));
        return out;
      },
      py::arg("hierarchy"), py::arg("eps"), py::arg("k"),
      "Sparse A, M, L, P per level (coarse to fine) as scipy matrices.");

  m.def(
      "dense_eigenvalues",
      [](const py::object& a, const py::object& mm) {
        return dense_generalized_eig(a.cast<SparseMatrix>(), mm.cast<SparseMatrix>()).values;
      },
      py::arg("A"), py::arg("M"));

  py::enum_<SubspaceMode>(m, "SubspaceMode")
      .value("plain", SubspaceMode::plain)
      .value("gradient", SubspaceMode::gradient)
      .value("lobpcg", SubspaceMode::lobpcg);

  py::class_<SolverOptions>(m, "SolverOptions")
      .def(py::init<>())
      .def_readwrite("p", &SolverOptions::p)
      .def_readwrite("q", &SolverOptions::q)
      .def_readwrite("subspace", &SolverOptions::subspace)
      .def_readwrite("tol", &SolverOptions::tol)
      .def_readwrite("max_iter", &SolverOptions::max_iter)
      .def_readwrite("precond_cycles", &SolverOptions::precond_cycles)
      .def_readwrite("projection_cycles", &SolverOptions::projection_cycles);

  py::class_<ScanOptions>(m, "ScanOptions")
      .def(py::init<>())
      .def_readwrite("solver", &ScanOptions::solver)
      .def_readwrite("mu", &ScanOptions::mu)
      .def_readwrite("warm_start", &ScanOptions::warm_start)
      .def_readwrite("seed", &ScanOptions::seed)
      .def_readwrite("threads", &ScanOptions::threads);

  py::class_<PointResult>(m, "PointResult")
      .def_readonly("k1", &PointResult::k1)
      .def_readonly("k2", &PointResult::k2)
      .def_readonly("eigenvalues", &PointResult::eigenvalues)
      .def_readonly("residuals", &PointResult::residuals)
      .def_readonly("iterations", &PointResult::iterations)
      .def_readonly("converged", &PointResult::converged)
      .def_readonly("warm_started", &PointResult::warm_started);

  py::class_<BandSurface>(m, "BandSurface")
      .def_readonly("kappa", &BandSurface::kappa)
      .def_readonly("p", &BandSurface::p)
      .def_readonly("points", &BandSurface::points)
      .def("at", py::overload_cast<int, int>(&BandSurface::at, py::const_), py::arg("i"), py::arg("j"),
           py::return_value_policy::reference_internal)
      .def("eigenvalues", [](const BandSurface& s) {
        // kappa x kappa x p array indexed [j, i, band].
        py::array_t<double> out({s.kappa, s.kappa, s.p});
        auto v = out.mutable_unchecked<3>();
        for (int j = 0; j < s.kappa; ++j)
          for (int i = 0; i < s.kappa; ++i)
            for (int l = 0; l < s.p; ++l) v(j, i, l) = s.at(i, j).eigenvalues[l];
        return out;
      });

  m.def(
      "solve_single",
      [](const GridHierarchy& h, const Permittivity& eps, const BlochParameter& k, const ScanOptions& opts) {
        py::gil_scoped_release release;
        return solve_single(h, finest_eps(h, eps), k, opts);
      },
      py::arg("hierarchy"), py::arg("eps"), py::arg("k"), py::arg("options") = ScanOptions{});

  m.def(
      "band_scan",
      [](const GridHierarchy& h, const Permittivity& eps, int kappa, const UnitCell& cell, const ScanOptions& opts) {
        py::gil_scoped_release release;
        return run_band_scan(h, finest_eps(h, eps), BlochGrid{kappa, cell}, opts);
      },
      py::arg("hierarchy"), py::arg("eps"), py::arg("kappa"), py::arg("cell") = UnitCell{},
      py::arg("options") = ScanOptions{});

  m.def("scan_dependencies", [](int i, int j) {
    std::vector<std::pair<int, int>> out;
    for (const auto& g : scan_dependencies(i, j)) out.emplace_back(g.i, g.j);
    return out;
  });

  m.def(
      "selftest",
      []() {
        std::ostringstream o;
        const bool ok = selftest(o);
        return py::make_tuple(ok, o.str());
      },
      "Runs the built-in checks; returns (ok, report).");
}
