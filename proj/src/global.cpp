#include "hrtmdg/global.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

namespace hrtmdg {

GlobalLayout::GlobalLayout(const Mesh& mesh, const ReferenceElement& ref)
    : num_cells(mesh.num_cells()),
      dim_rt(ref.dim_rt()),
      dim_pk(ref.dim_pk()),
      modes(ref.dim_pk_edge()),
      num_multipliers(mesh.num_interior_edges() * ref.dim_pk_edge()) {}

CVector pack(const Mesh& mesh, const GlobalLayout& layout, const FieldSolution& fields) {
  CVector x = CVector::Zero(layout.size());
  for (Index c = 0; c < layout.num_cells; ++c) {
    x.segment(layout.sigma(c, 0), layout.dim_rt) = fields.sigma[c];
    x.segment(layout.u(c, 0), layout.dim_pk) = fields.u[c];
  }
  for (Index i = 0; i < mesh.num_interior_edges(); ++i) {
    x.segment(layout.lambda(i * layout.modes), layout.modes) = fields.lambda[mesh.interior_edge(i)];
  }
  return x;
}

FieldSolution unpack(const Mesh& mesh, const GlobalLayout& layout, const CVector& x, int degree, Real kappa) {
  FieldSolution fields;
  fields.degree = degree;
  fields.kappa = kappa;
  fields.sigma.resize(layout.num_cells);
  fields.u.resize(layout.num_cells);
  for (Index c = 0; c < layout.num_cells; ++c) {
    fields.sigma[c] = x.segment(layout.sigma(c, 0), layout.dim_rt);
    fields.u[c] = x.segment(layout.u(c, 0), layout.dim_pk);
  }
  fields.lambda.assign(mesh.num_edges(), CVector::Zero(layout.modes));
  for (Index i = 0; i < mesh.num_interior_edges(); ++i) {
    fields.lambda[mesh.interior_edge(i)] = x.segment(layout.lambda(i * layout.modes), layout.modes);
  }
  return fields;
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Direct:
      return "direct";
    case SolverKind::Iterative:
      return "iterative";
    case SolverKind::ConjugateGradient:
      return "cg-experimental";
  }
  return "unknown";
}

SolverKind solver_kind_from_string(const std::string& name) {
  if (name == "direct") {
    return SolverKind::Direct;
  }
  if (name == "iterative") {
    return SolverKind::Iterative;
  }
  if (name == "cg-experimental") {
    return SolverKind::ConjugateGradient;
  }
  throw ConfigError("solver", "unknown solver '" + name + "' (expected direct, iterative or cg-experimental)");
}

CondensedSystem assemble_global(const Mesh& mesh, const ReferenceElement& ref, std::span<const LocalBlocks> blocks,
                                std::span<const CondensationCache> caches) {
  if (blocks.size() != caches.size() || static_cast<Index>(blocks.size()) != mesh.num_cells()) {
    throw Error("assembly needs exactly one block set and cache per cell");
  }
  CondensedSystem system;
  system.dof_map.num_interior_edges = mesh.num_interior_edges();
  system.dof_map.modes = ref.dim_pk_edge();
  system.kappa = blocks.empty() ? 0.0 : blocks.front().kappa;
  const Index n = system.dof_map.size();

  std::vector<bool> seen(blocks.size(), false);
  std::vector<Eigen::Triplet<Complex>> triplets;
  system.rhs = CVector::Zero(n);
  // Element-index order keeps the accumulation bit-reproducible.
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    const auto& cache = caches[b];
    if (blk.cell < 0 || blk.cell >= mesh.num_cells() || seen[blk.cell]) {
      throw Error("block " + std::to_string(b) + " refers to cell " + std::to_string(blk.cell) +
                  " that is missing or already assembled");
    }
    seen[blk.cell] = true;
    const auto& slots = blk.multiplier_slots;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i] < 0 || slots[i] >= n) {
        throw Error("cell " + std::to_string(blk.cell) + " references multiplier " + std::to_string(slots[i]) +
                    " outside the interior-edge DOF range");
      }
      system.rhs(slots[i]) += cache.G_local(static_cast<Index>(i));
      for (std::size_t j = 0; j < slots.size(); ++j) {
        triplets.emplace_back(slots[i], slots[j], cache.S(static_cast<Index>(i), static_cast<Index>(j)));
      }
    }
  }
  system.matrix.resize(n, n);
  system.matrix.setFromTriplets(triplets.begin(), triplets.end());
  system.matrix.makeCompressed();
  return system;
}

namespace {

Real relative_residual(const SparseMatrix& a, const CVector& x, const CVector& b) {
  const Real nb = b.norm();
  return (a * x - b).norm() / (nb > 0.0 ? nb : 1.0);
}

// sigma_min / sigma_max by inverse and direct power iteration on S^H S.
Real estimate_rcond(const SparseMatrix& a, Eigen::SparseLU<SparseMatrix>& lu) {
  const Index n = a.rows();
  std::mt19937_64 rng(7);
  std::normal_distribution<Real> normal;
  CVector start(n);
  for (Index i = 0; i < n; ++i) {
    start(i) = Complex(normal(rng), normal(rng));
  }
  start.normalize();

  CVector x = start;
  Real inv_sq = 0.0;
  for (int it = 0; it < 40; ++it) {
    const CVector y = lu.solve(x);
    const CVector z = lu.adjoint().solve(y);
    const Real next = z.norm();
    if (!std::isfinite(next)) {
      return 0.0;
    }
    x = z / next;
    const bool done = std::abs(next - inv_sq) <= 1e-3 * next;
    inv_sq = next;
    if (done) {
      break;
    }
  }
  x = start;
  Real max_sq = 0.0;
  for (int it = 0; it < 40; ++it) {
    const CVector z = a.adjoint() * (a * x);
    const Real next = z.norm();
    x = z / next;
    const bool done = std::abs(next - max_sq) <= 1e-3 * next;
    max_sq = next;
    if (done) {
      break;
    }
  }
  if (inv_sq <= 0.0 || max_sq <= 0.0) {
    return 0.0;
  }
  return 1.0 / std::sqrt(inv_sq * max_sq);
}

}  // namespace

CVector solve_multiplier(const CondensedSystem& system, const SolverOptions& options, SolveStats* stats) {
  const auto& a = system.matrix;
  const auto& b = system.rhs;
  SolveStats local;
  local.kind = options.kind;
  local.unknowns = a.rows();
  if (b.size() != a.rows()) {
    throw Error("right-hand side size does not match the system");
  }
  if (a.rows() == 0 || b.isZero(0.0)) {
    local.relative_residual = 0.0;
    if (stats) {
      *stats = local;
    }
    return CVector::Zero(a.rows());
  }

  CVector x;
  switch (options.kind) {
    case SolverKind::Direct: {
      Eigen::SparseLU<SparseMatrix> lu;
      lu.compute(a);
      if (lu.info() != Eigen::Success) {
        throw GlobalResonanceError(system.kappa, "sparse LU failed: " + lu.lastErrorMessage());
      }
      if (options.estimate_condition) {
        local.rcond_estimate = estimate_rcond(a, lu);
        if (!(local.rcond_estimate >= options.rcond_threshold)) {
          throw GlobalResonanceError(system.kappa, "condensed matrix is numerically singular (rcond estimate " +
                                                       std::to_string(local.rcond_estimate) + ")");
        }
      }
      x = lu.solve(b);
      local.relative_residual = relative_residual(a, x, b);
      if (!(local.relative_residual <= 1e-10)) {
        throw GlobalResonanceError(system.kappa,
                                   "direct solve residual " + std::to_string(local.relative_residual));
      }
      break;
    }
    case SolverKind::Iterative: {
      Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<Complex>> solver;
      solver.setTolerance(options.tolerance);
      solver.setMaxIterations(options.max_iterations);
      solver.compute(a);
      x = solver.solve(b);
      local.iterations = static_cast<int>(solver.iterations());
      local.relative_residual = relative_residual(a, x, b);
      if (solver.info() != Eigen::Success || !(local.relative_residual <= 10.0 * options.tolerance)) {
        throw ConvergenceError(local.iterations, local.relative_residual);
      }
      break;
    }
    case SolverKind::ConjugateGradient: {
      if (!options.trust_paper_claim) {
        throw ConfigError("solver", "cg-experimental assumes a Hermitian positive definite system; "
                                    "enable trust_paper_claim to run it");
      }
      Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<Complex>>
          solver;
      solver.setTolerance(options.tolerance);
      solver.setMaxIterations(options.max_iterations);
      solver.compute(a);
      x = solver.solve(b);
      local.iterations = static_cast<int>(solver.iterations());
      local.relative_residual = relative_residual(a, x, b);
      if (solver.info() != Eigen::Success || !(local.relative_residual <= 10.0 * options.tolerance)) {
        throw ConvergenceError(local.iterations, local.relative_residual);
      }
      break;
    }
  }
  if (stats) {
    *stats = local;
  }
  return x;
}

FieldSolution recover_fields(const Mesh& mesh, const ReferenceElement& ref, const CVector& lambda,
                             std::span<const LocalBlocks> blocks, std::span<const CondensationCache> caches) {
  FieldSolution fields;
  fields.degree = ref.degree();
  fields.kappa = blocks.empty() ? 0.0 : blocks.front().kappa;
  fields.sigma.resize(mesh.num_cells());
  fields.u.resize(mesh.num_cells());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    CVector local(static_cast<Index>(blk.multiplier_slots.size()));
    for (std::size_t i = 0; i < blk.multiplier_slots.size(); ++i) {
      local(static_cast<Index>(i)) = lambda(blk.multiplier_slots[i]);
    }
    auto [sigma, u] = back_substitute(local, caches[b], blk);
    fields.sigma[blk.cell] = std::move(sigma);
    fields.u[blk.cell] = std::move(u);
  }
  const int modes = ref.dim_pk_edge();
  fields.lambda.assign(mesh.num_edges(), CVector::Zero(modes));
  for (Index i = 0; i < mesh.num_interior_edges(); ++i) {
    fields.lambda[mesh.interior_edge(i)] = lambda.segment(multiplier_index(i, 0, ref.degree()), modes);
  }
  return fields;
}

Discretization discretize(const Mesh& mesh, const ReferenceElement& ref, Real kappa, const ProblemData& data,
                          const AssemblyOptions& options) {
  Discretization disc;
  const ReferenceTables matrix_tables(ref, ref.quad_degree());
  const ReferenceTables rhs_tables(ref, ref.rhs_quad_degree());
  disc.blocks.reserve(mesh.num_cells());
  disc.caches.reserve(mesh.num_cells());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    disc.blocks.push_back(assemble_local_blocks(mesh, c, matrix_tables, rhs_tables, kappa, data, options));
  }
  for (const auto& blk : disc.blocks) {
    disc.caches.push_back(condense(blk, options));
  }
  disc.system = assemble_global(mesh, ref, disc.blocks, disc.caches);
  return disc;
}

FieldSolution solve(const Mesh& mesh, const ReferenceElement& ref, Real kappa, const ProblemData& data,
                    const SolveOptions& options, SolveStats* stats) {
  Discretization disc;
  try {
    disc = discretize(mesh, ref, kappa, data, options.assembly);
  } catch (Error& e) {
    e.add_context("assembly/condensation");
    throw;
  }
  CVector lambda;
  try {
    lambda = solve_multiplier(disc.system, options.solver, stats);
  } catch (Error& e) {
    e.add_context("multiplier solve");
    throw;
  }
  try {
    return recover_fields(mesh, ref, lambda, disc.blocks, disc.caches);
  } catch (Error& e) {
    e.add_context("field recovery");
    throw;
  }
}

SparseMatrix assemble_monolithic(const Mesh& mesh, const ReferenceElement& ref, std::span<const LocalBlocks> blocks,
                                 CVector* rhs) {
  const GlobalLayout layout(mesh, ref);
  std::vector<Eigen::Triplet<Complex>> triplets;
  if (rhs) {
    *rhs = CVector::Zero(layout.size());
  }
  for (const auto& blk : blocks) {
    const Index c = blk.cell;
    const int nrt = layout.dim_rt;
    const int np = layout.dim_pk;
    for (int i = 0; i < nrt; ++i) {
      for (int j = 0; j < nrt; ++j) {
        triplets.emplace_back(layout.sigma(c, i), layout.sigma(c, j), blk.A(i, j));
      }
      for (int j = 0; j < np; ++j) {
        triplets.emplace_back(layout.sigma(c, i), layout.u(c, j), blk.B(i, j));
        triplets.emplace_back(layout.u(c, j), layout.sigma(c, i), std::conj(blk.B(i, j)));
      }
      for (std::size_t m = 0; m < blk.multiplier_slots.size(); ++m) {
        const Index slot = layout.lambda(blk.multiplier_slots[m]);
        triplets.emplace_back(layout.sigma(c, i), slot, blk.D(i, static_cast<Index>(m)));
        triplets.emplace_back(slot, layout.sigma(c, i), std::conj(blk.D(i, static_cast<Index>(m))));
      }
    }
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < np; ++j) {
        triplets.emplace_back(layout.u(c, i), layout.u(c, j), blk.E(i, j));
      }
    }
    if (rhs) {
      rhs->segment(layout.sigma(c, 0), nrt) = blk.F1;
      rhs->segment(layout.u(c, 0), np) = blk.F2;
    }
  }
  SparseMatrix k(layout.size(), layout.size());
  k.setFromTriplets(triplets.begin(), triplets.end());
  k.makeCompressed();
  return k;
}

FieldSolution solve_monolithic(const Mesh& mesh, const ReferenceElement& ref, Real kappa, const ProblemData& data,
                               const AssemblyOptions& options, Index unknown_cap) {
  const GlobalLayout layout(mesh, ref);
  if (layout.size() > unknown_cap) {
    throw ConfigError("mesh", "monolithic solve limited to " + std::to_string(unknown_cap) + " unknowns, got " +
                                  std::to_string(layout.size()));
  }
  const ReferenceTables matrix_tables(ref, ref.quad_degree());
  const ReferenceTables rhs_tables(ref, ref.rhs_quad_degree());
  std::vector<LocalBlocks> blocks;
  blocks.reserve(mesh.num_cells());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    blocks.push_back(assemble_local_blocks(mesh, c, matrix_tables, rhs_tables, kappa, data, options));
  }
  CVector rhs;
  const SparseMatrix k = assemble_monolithic(mesh, ref, blocks, &rhs);
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(k);
  if (lu.info() != Eigen::Success) {
    throw GlobalResonanceError(kappa, "monolithic sparse LU failed: " + lu.lastErrorMessage());
  }
  const CVector x = lu.solve(rhs);
  if (!x.allFinite()) {
    throw GlobalResonanceError(kappa, "monolithic solve produced non-finite values");
  }
  return unpack(mesh, layout, x, ref.degree(), kappa);
}

void write_matrix_market(std::ostream& out, const SparseMatrix& matrix) {
  out << "%%MatrixMarket matrix coordinate complex general\n";
  out << matrix.rows() << ' ' << matrix.cols() << ' ' << matrix.nonZeros() << '\n';
  const auto old_precision = out.precision(17);
  for (Index col = 0; col < matrix.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(matrix, col); it; ++it) {
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
    }
  }
  out.precision(old_precision);
}

Real flux_jump_residual(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& fields) {
  const ReferenceTables tables(ref, ref.quad_degree());
  const int modes = ref.dim_pk_edge();
  std::vector<CVector> moments(mesh.num_edges(), CVector::Zero(modes));
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const ElementValues ev(mesh, c, tables);
    for (const auto& f : ev.faces) {
      if (f.boundary) {
        continue;
      }
      const RMatrix coupling = f.multiplier * f.weights.asDiagonal() * f.rt_normal.transpose();
      moments[f.edge] += coupling.cast<Complex>() * fields.sigma[c];
    }
  }
  Real worst = 0.0;
  for (const auto& m : moments) {
    worst = std::max(worst, m.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace hrtmdg
