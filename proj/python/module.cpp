#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hrtmdg/analysis.hpp"
#include "hrtmdg/global.hpp"
#include "hrtmdg/mesh.hpp"
#include "hrtmdg/mms.hpp"
#include "hrtmdg/rates.hpp"
#include "hrtmdg/verify.hpp"

namespace py = pybind11;
using namespace hrtmdg;

namespace {

SolverKind solver_from_name(const std::string& name) {
  if (name == "direct") return SolverKind::Direct;
  if (name == "iterative") return SolverKind::Iterative;
  if (name == "cg-experimental") return SolverKind::ConjugateGradient;
  throw ConfigError("solver", "expected direct, iterative or cg-experimental, got '" + name + "'");
}

SolveOptions make_options(const std::string& solver, Real tol, int maxit, bool trust) {
  SolveOptions o;
  o.solver.kind = solver_from_name(solver);
  o.solver.tolerance = tol;
  o.solver.max_iterations = maxit;
  o.solver.trust_paper_claim = trust;
  return o;
}

CaseSpec make_spec(const std::string& name, Real theta, int degree) {
  CaseSpec s;
  s.name = name;
  s.theta = theta;
  s.polynomial_degree = degree;
  return s;
}

Eigen::MatrixX2d vertex_array(const Mesh& m) {
  Eigen::MatrixX2d out(m.num_vertices(), 2);
  for (Index i = 0; i < m.num_vertices(); ++i) {
    out.row(i) = m.vertices()[i].transpose();
  }
  return out;
}

Eigen::Matrix<Index, Eigen::Dynamic, 3, Eigen::RowMajor> cell_array(const Mesh& m) {
  Eigen::Matrix<Index, Eigen::Dynamic, 3, Eigen::RowMajor> out(m.num_cells(), 3);
  for (Index c = 0; c < m.num_cells(); ++c) {
    for (int l = 0; l < 3; ++l) {
      out(c, l) = m.cells()[c][l];
    }
  }
  return out;
}

Mesh mesh_from_arrays(const Eigen::MatrixX2d& vertices, const Eigen::Matrix<Index, Eigen::Dynamic, 3>& cells) {
  std::vector<Point> v(vertices.rows());
  for (Index i = 0; i < vertices.rows(); ++i) {
    v[i] = vertices.row(i).transpose();
  }
  std::vector<std::array<Index, 3>> c(cells.rows());
  for (Index i = 0; i < cells.rows(); ++i) {
    c[i] = {cells(i, 0), cells(i, 1), cells(i, 2)};
  }
  return Mesh::from_cells(std::move(v), std::move(c));
}

CVector flatten(const std::vector<CVector>& blocks) {
  Index total = 0;
  for (const auto& b : blocks) total += b.size();
  CVector out(total);
  Index pos = 0;
  for (const auto& b : blocks) {
    out.segment(pos, b.size()) = b;
    pos += b.size();
  }
  return out;
}

py::dict solve_case(const Mesh& mesh, int k, Real kappa, const std::string& case_name, Real theta, int poly_degree,
                    const std::string& solver, Real tol, int maxit, bool trust, int quad_degree) {
  const ReferenceElement ref(k, quad_degree);
  const ManufacturedCase mc = make_case(make_spec(case_name, theta, poly_degree), kappa);
  require_valid_case(mc);
  SolveStats stats;
  FieldSolution f;
  {
    py::gil_scoped_release release;
    f = solve(mesh, ref, kappa, mc.data(), make_options(solver, tol, maxit, trust), &stats);
  }
  const ConservationReport cons = check_conservation(mesh, ref, f, mc.source);
  py::dict d;
  d["err_u"] = broken_l2_norm_u(mesh, ref, f.u, mc.u);
  d["err_sigma"] = broken_l2_norm_sigma(mesh, ref, f.sigma, mc.sigma);
  d["err_energy"] = check_projected_error_bound(mc, mesh, ref, f).energy_error;
  d["conservation_max"] = cons.max_local;
  d["conservation_global"] = cons.global_residual;
  d["flux_jump"] = cons.jump;
  d["iterations"] = stats.iterations;
  d["relative_residual"] = stats.relative_residual;
  d["unknowns"] = stats.unknowns;
  d["u"] = flatten(f.u);
  d["sigma"] = flatten(f.sigma);
  d["lambda"] = flatten(f.lambda);
  return d;
}

py::list convergence(const std::string& case_name, std::vector<int> ks, std::vector<int> levels,
                     std::vector<Real> kappas, Real theta, int poly_degree, const std::string& solver) {
  const CaseSpec spec = make_spec(case_name, theta, poly_degree);
  const SolveOptions options = make_options(solver, 1e-10, 10000, false);
  ConvergenceTable table;
  {
    py::gil_scoped_release release;
    for (int k : ks) {
      run_convergence([&](Real kappa) { return make_case(spec, kappa); }, k, levels, kappas, table, options);
    }
  }
  py::list rows;
  for (const auto& r : table.rows) {
    py::dict d;
    d["case"] = r.case_name;
    d["k"] = r.k;
    d["kappa"] = r.kappa;
    d["n"] = r.n;
    d["h"] = r.h;
    d["err_u"] = r.err_u;
    d["err_sigma"] = r.err_sigma;
    d["err_energy"] = r.err_energy;
    d["rate_u"] = r.rate_u;
    d["rate_sigma"] = r.rate_sigma;
    d["const_norm"] = r.const_norm;
    rows.append(d);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hybrid Raviart-Thomas mixed DG solver for the 2D Helmholtz equation";

  static py::exception<Error> base(m, "HrtmdgError", PyExc_RuntimeError);
  static py::exception<ConfigError> config(m, "ConfigError", PyExc_ValueError);
  static py::exception<ParseError> parse(m, "MeshParseError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config, e.what());
    } catch (const ParseError& e) {
      py::set_error(parse, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  py::class_<Mesh>(m, "Mesh")
      .def_static("structured", &generate_structured, py::arg("n"), "Unit square, n x n squares split into two")
      .def_static("read", &read_mesh_file, py::arg("path"))
      .def_static("from_arrays", &mesh_from_arrays, py::arg("vertices"), py::arg("cells"))
      .def_property_readonly("num_vertices", &Mesh::num_vertices)
      .def_property_readonly("num_cells", &Mesh::num_cells)
      .def_property_readonly("num_edges", &Mesh::num_edges)
      .def_property_readonly("num_interior_edges", &Mesh::num_interior_edges)
      .def_property_readonly("h", &Mesh::h)
      .def_property_readonly("vertices", &vertex_array)
      .def_property_readonly("cells", &cell_array)
      .def("to_text", &export_mesh);

  m.def("solve", &solve_case, py::arg("mesh"), py::arg("k"), py::arg("kappa"), py::arg("case") = "sine_product",
        py::arg("theta") = kDefaultPlaneWaveAngle, py::arg("poly_degree") = 2, py::arg("solver") = "direct",
        py::arg("tol") = 1e-10, py::arg("maxit") = 10000, py::arg("trust_paper_claim") = false,
        py::arg("quad_degree") = -1,
        "Solve a manufactured case and return errors, conservation residuals and coefficients");

  m.def("convergence", &convergence, py::arg("case") = "sine_product", py::arg("k") = std::vector<int>{0, 1},
        py::arg("levels") = std::vector<int>{8, 16, 32, 64}, py::arg("kappa") = std::vector<Real>{5.0},
        py::arg("theta") = kDefaultPlaneWaveAngle, py::arg("poly_degree") = 2, py::arg("solver") = "direct");

  m.def("csv_header", [] { return std::string(kConvergenceCsvHeader); });

  m.def(
      "verify",
      [](std::uint64_t seed, bool inject) {
        VerifyOptions o;
        o.seed = seed;
        o.inject_multiplier_sign_error = inject;
        std::vector<ProbeResult> probes;
        {
          py::gil_scoped_release release;
          probes = run_verify_suite(o);
        }
        return verify_report(probes, o).dump(2);
      },
      py::arg("seed") = 42, py::arg("inject_sign_error") = false, "Run the probe suite; returns the JSON report");

  m.def(
      "convergence_rate",
      [](std::vector<Real> errors, std::vector<Real> hs) { return compute_rate(errors, hs); }, py::arg("errors"),
      py::arg("hs"));

  m.def(
      "nearest_dirichlet_eigenvalue",
      [](Real kappa) {
        const NearestEigenvalue e = nearest_dirichlet_eigenvalue(kappa);
        return py::dict(py::arg("m") = e.m, py::arg("n") = e.n, py::arg("value") = e.value, py::arg("gap") = e.gap);
      },
      py::arg("kappa"));

  m.attr("SCHEMA_VERSION") = kReportSchemaVersion;
}
