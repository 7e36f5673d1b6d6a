#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hrtmdg/analysis.hpp"
#include "hrtmdg/verify.hpp"

namespace hrtmdg::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kMaxDegree = ReferenceElement::kDefaultMaxDegree;

SolverKind parse_solver(const std::string& name) {
  if (name == "direct") {
    return SolverKind::Direct;
  }
  if (name == "iterative") {
    return SolverKind::Iterative;
  }
  if (name == "cg-experimental") {
    return SolverKind::ConjugateGradient;
  }
  throw ConfigError("solver", "expected direct, iterative or cg-experimental, got '" + name + "'");
}

std::string solver_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::Direct:
      return "direct";
    case SolverKind::Iterative:
      return "iterative";
    case SolverKind::ConjugateGradient:
      return "cg-experimental";
  }
  return "direct";
}

void validate(RunConfig& c) {
  if (c.command != "solve" && c.command != "convergence" && c.command != "verify") {
    throw ConfigError("command", "expected solve, convergence or verify, got '" + c.command + "'");
  }
  if (c.k.empty()) {
    c.k = c.command == "convergence" ? std::vector<int>{0, 1} : std::vector<int>{1};
  }
  for (int k : c.k) {
    if (k < 0 || k > kMaxDegree) {
      throw ConfigError("k", "degree must lie in [0, " + std::to_string(kMaxDegree) + "], got " + std::to_string(k));
    }
  }
  if (c.kappa.empty()) {
    c.kappa = {5.0};
  }
  for (Real kappa : c.kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
      throw ConfigError("kappa", "must be a positive finite number, got " + std::to_string(kappa));
    }
  }
  if (c.mesh_file && !c.mesh_n.empty()) {
    throw ConfigError("mesh-file", "cannot be combined with --mesh-n");
  }
  if (c.mesh_n.empty() && !c.mesh_file) {
    c.mesh_n = c.command == "convergence" ? std::vector<int>{8, 16, 32, 64} : std::vector<int>{8};
  }
  for (int n : c.mesh_n) {
    if (n < 1 || n > 4096) {
      throw ConfigError("mesh-n", "must lie in [1, 4096], got " + std::to_string(n));
    }
  }
  if (c.mesh_file) {
    if (c.command == "convergence") {
      throw ConfigError("mesh-file", "convergence studies use structured meshes (--mesh-n)");
    }
    if (!fs::is_regular_file(*c.mesh_file)) {
      throw ConfigError("mesh-file", "cannot read '" + c.mesh_file->string() + "'");
    }
  }
  if (c.command == "solve") {
    if (c.k.size() != 1) {
      throw ConfigError("k", "solve takes exactly one degree");
    }
    if (c.kappa.size() != 1) {
      throw ConfigError("kappa", "solve takes exactly one wavenumber");
    }
    if (c.mesh_n.size() > 1) {
      throw ConfigError("mesh-n", "solve takes exactly one mesh");
    }
  }
  if (c.command == "convergence") {
    for (std::size_t i = 1; i < c.mesh_n.size(); ++i) {
      if (c.mesh_n[i] <= c.mesh_n[i - 1]) {
        throw ConfigError("mesh-n", "levels must be strictly increasing");
      }
    }
  }
  if (c.quad_degree != -1) {
    for (int k : c.k) {
      if (c.quad_degree < 2 * k || c.quad_degree > kMaxQuadratureDegree) {
        throw ConfigError("quad-degree", "must lie in [2k, " + std::to_string(kMaxQuadratureDegree) + "], got " +
                                             std::to_string(c.quad_degree));
      }
    }
  }
  if (!(c.solver.tolerance > 0.0)) {
    throw ConfigError("tol", "must be positive");
  }
  if (c.solver.max_iterations < 1) {
    throw ConfigError("maxit", "must be positive");
  }
  if (c.solver.kind == SolverKind::ConjugateGradient && !c.solver.trust_paper_claim) {
    throw ConfigError("solver", "cg-experimental requires --trust-paper-claim");
  }
  if (c.case_spec.polynomial_degree < 0) {
    throw ConfigError("poly-degree", "must be non-negative");
  }
  if (c.case_spec.name != "plane_wave" && c.case_spec.name != "sine_product" && c.case_spec.name != "polynomial") {
    throw ConfigError("case", "expected plane_wave, sine_product or polynomial, got '" + c.case_spec.name + "'");
  }
  if (c.dump_matrix) {
    if (c.command != "solve") {
      throw ConfigError("dump-matrix", "only available with --command solve");
    }
    const fs::path p = c.dump_matrix->lexically_normal();
    if (p.empty() || p.is_absolute() || p.has_root_name() || *p.begin() == ".." || !p.has_filename()) {
      throw ConfigError("dump-matrix", "must be a file name relative to --out-dir without '..'");
    }
    c.dump_matrix = p;
  }
  if (c.out_dir.empty()) {
    throw ConfigError("out-dir", "must not be empty");
  }
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("out-dir", "cannot create '" + dir.string() + "'");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("out-dir", "cannot write '" + path.string() + "'");
  }
  out << text;
}

ReferenceElement make_reference(int k, int quad_degree) { return ReferenceElement(k, quad_degree); }

Mesh load_mesh(const RunConfig& c) {
  if (c.mesh_file) {
    return read_mesh_file(*c.mesh_file);
  }
  return generate_structured(c.mesh_n.front());
}

json solver_json(const RunConfig& c) {
  return {{"kind", solver_name(c.solver.kind)},
          {"tolerance", c.solver.tolerance},
          {"max_iterations", c.solver.max_iterations},
          {"trust_paper_claim", c.solver.trust_paper_claim}};
}

json case_json(const CaseSpec& spec) {
  json j = {{"name", spec.name}};
  if (spec.name == "plane_wave") {
    j["theta"] = spec.theta;
  }
  if (spec.name == "polynomial") {
    j["degree"] = spec.polynomial_degree;
  }
  return j;
}

Real seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::optional<RunConfig> parse_args(int argc, const char* const* argv, std::ostream& out) {
  RunConfig c;
  std::string solver = "direct";
  std::string mesh_file, dump_matrix, out_dir = c.out_dir.string();
  CLI::App app{"Hybrid Raviart-Thomas mixed DG solver for the 2D Helmholtz equation"};
  app.add_option("--command", c.command, "solve | convergence | verify");
  app.add_option("--k", c.k, "Polynomial degree (repeatable for convergence)");
  app.add_option("--kappa", c.kappa, "Wavenumber (repeatable for convergence)");
  app.add_option("--mesh-n", c.mesh_n, "Structured mesh with n x n squares (repeatable for convergence)");
  app.add_option("--mesh-file", mesh_file, "ASCII mesh file");
  app.add_option("--case", c.case_spec.name, "plane_wave | sine_product | polynomial");
  app.add_option("--theta", c.case_spec.theta, "Plane-wave propagation angle");
  app.add_option("--poly-degree", c.case_spec.polynomial_degree, "Degree of the polynomial case");
  app.add_option("--solver", solver, "direct | iterative | cg-experimental");
  app.add_option("--tol", c.solver.tolerance, "Iterative solver relative tolerance");
  app.add_option("--maxit", c.solver.max_iterations, "Iterative solver iteration limit");
  app.add_flag("--trust-paper-claim", c.solver.trust_paper_claim, "Allow conjugate gradients on the multiplier system");
  app.add_option("--quad-degree", c.quad_degree, "Element matrix quadrature degree");
  app.add_option("--out-dir", out_dir, "Directory for all outputs");
  app.add_option("--seed", c.seed, "Seed for randomized probes");
  app.add_option("--dump-matrix", dump_matrix, "Write the multiplier system (Matrix Market) to this file in out-dir");
  app.add_flag("--inject-sign-error", c.inject_sign_error, "Test hook: flip the sign of D on odd cells")
      ->group("");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw ConfigError("arguments", e.what());
  }
  c.solver.kind = parse_solver(solver);
  if (!mesh_file.empty()) {
    c.mesh_file = mesh_file;
  }
  if (!dump_matrix.empty()) {
    c.dump_matrix = dump_matrix;
  }
  c.out_dir = out_dir;
  validate(c);
  return c;
}

int run_solve(const RunConfig& c, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const Mesh mesh = load_mesh(c);
  const int k = c.k.front();
  const Real kappa = c.kappa.front();
  const ReferenceElement ref = make_reference(k, c.quad_degree);
  const ManufacturedCase mc = make_case(c.case_spec, kappa);
  require_valid_case(mc);
  prepare_out_dir(c.out_dir);

  SolveOptions options;
  options.solver = c.solver;
  options.assembly.inject_multiplier_sign_error = c.inject_sign_error;
  if (c.dump_matrix) {
    const Discretization disc = discretize(mesh, ref, kappa, mc.data(), options.assembly);
    const fs::path path = c.out_dir / *c.dump_matrix;
    if (path.has_parent_path()) {
      prepare_out_dir(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
      throw ConfigError("dump-matrix", "cannot write '" + path.string() + "'");
    }
    write_matrix_market(out, disc.system.matrix);
  }
  SolveStats stats;
  const FieldSolution f = solve(mesh, ref, kappa, mc.data(), options, &stats);

  const Real err_u = broken_l2_norm_u(mesh, ref, f.u, mc.u);
  const Real err_sigma = broken_l2_norm_sigma(mesh, ref, f.sigma, mc.sigma);
  const ProjectedErrorBound bound = check_projected_error_bound(mc, mesh, ref, f);
  const ConservationReport cons = check_conservation(mesh, ref, f, mc.source);

  json summary;
  summary["schema_version"] = kReportSchemaVersion;
  summary["command"] = "solve";
  summary["k"] = k;
  summary["kappa"] = kappa;
  summary["case"] = case_json(c.case_spec);
  summary["mesh"] = {{"source", c.mesh_file ? c.mesh_file->string() : "structured"},
                     {"n", c.mesh_file ? json(nullptr) : json(c.mesh_n.front())},
                     {"cells", mesh.num_cells()},
                     {"edges", mesh.num_edges()},
                     {"interior_edges", mesh.num_interior_edges()},
                     {"h", mesh.h()}};
  summary["quad_degree"] = ref.quad_degree();
  summary["err_u"] = err_u;
  summary["err_sigma"] = err_sigma;
  summary["err_energy"] = bound.energy_error;
  summary["conservation_max"] = cons.max_local;
  summary["conservation_scale"] = cons.local_scale;
  summary["conservation_global"] = cons.global_residual;
  summary["flux_jump"] = cons.jump;
  summary["solver"] = solver_json(c);
  summary["solver"]["iterations"] = stats.iterations;
  summary["solver"]["relative_residual"] = stats.relative_residual;
  summary["solver"]["rcond_estimate"] = std::isfinite(stats.rcond_estimate) ? json(stats.rcond_estimate) : json(nullptr);
  summary["solver"]["unknowns"] = stats.unknowns;
  if (c.dump_matrix) {
    summary["matrix_file"] = c.dump_matrix->string();
  }
  write_text(c.out_dir / "solve_summary.json", summary.dump(2) + "\n");
  log << "solve: k=" << k << " kappa=" << kappa << " cells=" << mesh.num_cells() << " err_u=" << err_u
      << " err_sigma=" << err_sigma << " conservation_max=" << cons.max_local << " (" << seconds_since(t0) << " s)\n";
  return kOk;
}

int run_convergence(const RunConfig& c, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  for (Real kappa : c.kappa) {
    check_resonance_guard(kappa);
    const NearestEigenvalue e = nearest_dirichlet_eigenvalue(kappa);
    log << "kappa=" << kappa << ": nearest Dirichlet eigenvalue pi^2(" << e.m << "^2+" << e.n << "^2), gap "
        << e.gap << "\n";
  }
  prepare_out_dir(c.out_dir);
  SolveOptions options;
  options.solver = c.solver;
  options.assembly.inject_multiplier_sign_error = c.inject_sign_error;
  const CaseSpec spec = c.case_spec;
  const CaseFactory factory = [spec](Real kappa) { return make_case(spec, kappa); };

  json meta;
  meta["schema_version"] = kReportSchemaVersion;
  meta["command"] = "convergence";
  meta["case"] = case_json(spec);
  meta["k"] = c.k;
  meta["kappa"] = c.kappa;
  meta["mesh_n"] = c.mesh_n;
  meta["solver"] = solver_json(c);
  meta["columns"] = kConvergenceCsvHeader;

  ConvergenceTable table;
  auto flush = [&](bool complete) {
    std::ostringstream csv;
    write_csv(csv, table);
    write_text(c.out_dir / "convergence.csv", csv.str());
    meta["complete"] = complete;
    meta["rows"] = table.rows.size();
    write_text(c.out_dir / "convergence.meta.json", meta.dump(2) + "\n");
  };
  try {
    for (int k : c.k) {
      hrtmdg::run_convergence(factory, k, c.mesh_n, c.kappa, table, options);
    }
  } catch (...) {
    flush(false);
    throw;
  }
  flush(true);
  log << "convergence: " << table.rows.size() << " rows (" << seconds_since(t0) << " s)\n";
  return kOk;
}

int run_verify(const RunConfig& c, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  prepare_out_dir(c.out_dir);
  VerifyOptions options;
  options.seed = c.seed;
  options.solver = c.solver;
  options.inject_multiplier_sign_error = c.inject_sign_error;
  const std::vector<ProbeResult> probes = run_verify_suite(options);
  const json report = verify_report(probes, options);
  write_text(c.out_dir / "verify_report.json", report.dump(2) + "\n");
  for (const auto& p : probes) {
    log << (p.passed ? "PASS " : "FAIL ") << p.name << "\n";
  }
  log << "verify: " << (report["passed"].get<bool>() ? "all probes passed" : "failures") << " ("
      << seconds_since(t0) << " s)\n";
  return report["passed"].get<bool>() ? kOk : kVerifyFailed;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    const std::optional<RunConfig> config = parse_args(argc, argv, out);
    if (!config) {
      return kOk;
    }
    if (config->command == "solve") {
      return run_solve(*config, err);
    }
    if (config->command == "convergence") {
      return run_convergence(*config, err);
    }
    return run_verify(*config, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const ParseError& e) {
    err << "mesh file error: " << e.what() << "\n";
    return kConfig;
  } catch (const TopologyError& e) {
    err << "mesh error: " << e.what() << "\n";
    return kConfig;
  } catch (const GeometryError& e) {
    err << "mesh error: " << e.what() << "\n";
    return kConfig;
  } catch (const Error& e) {
    err << "solver error: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kSolver;
  }
}

}  // namespace hrtmdg::cli
