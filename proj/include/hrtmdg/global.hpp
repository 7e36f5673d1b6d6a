#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "hrtmdg/local.hpp"

namespace hrtmdg {

using SparseMatrix = Eigen::SparseMatrix<Complex>;

struct DofMap {
  Index num_interior_edges = 0;
  int modes = 1;

  Index size() const { return num_interior_edges * modes; }
  Index index(Index interior_edge, int mode) const { return interior_edge * modes + mode; }
};

/// Global Schur complement system S lambda = G on the multiplier DOFs.
struct CondensedSystem {
  SparseMatrix matrix;
  CVector rhs;
  DofMap dof_map;
  Real kappa = 0.0;
};

/// sigma, u per cell (RT_k / P_k coefficients) and lambda per mesh edge
/// (P_k edge coefficients, identically zero on boundary edges).
struct FieldSolution {
  int degree = 0;
  Real kappa = 0.0;
  std::vector<CVector> sigma;
  std::vector<CVector> u;
  std::vector<CVector> lambda;
};

/// Unknown numbering of the uncondensed system: all sigma blocks (cell
/// major), then all u blocks, then the multipliers.
struct GlobalLayout {
  GlobalLayout(const Mesh& mesh, const ReferenceElement& ref);

  Index num_cells = 0;
  int dim_rt = 0;
  int dim_pk = 0;
  int modes = 0;
  Index num_multipliers = 0;

  Index sigma(Index cell, int i) const { return cell * dim_rt + i; }
  Index u(Index cell, int j) const { return num_cells * dim_rt + cell * dim_pk + j; }
  Index lambda(Index slot) const { return num_cells * (dim_rt + dim_pk) + slot; }
  Index size() const { return num_cells * (dim_rt + dim_pk) + num_multipliers; }
};

CVector pack(const Mesh& mesh, const GlobalLayout& layout, const FieldSolution& fields);
FieldSolution unpack(const Mesh& mesh, const GlobalLayout& layout, const CVector& x, int degree, Real kappa);

enum class SolverKind { Direct, Iterative, ConjugateGradient };

struct SolverOptions {
  SolverKind kind = SolverKind::Direct;
  Real tolerance = 1e-12;
  int max_iterations = 20000;
  /// Required for SolverKind::ConjugateGradient, which presumes S is
  /// Hermitian positive definite.
  bool trust_paper_claim = false;
  Real rcond_threshold = 1e-12;
  bool estimate_condition = true;
};

struct SolveStats {
  SolverKind kind = SolverKind::Direct;
  int iterations = 0;
  Real relative_residual = 0.0;
  Real rcond_estimate = std::numeric_limits<Real>::quiet_NaN();
  Index unknowns = 0;
};

std::string to_string(SolverKind kind);
SolverKind solver_kind_from_string(const std::string& name);

CondensedSystem assemble_global(const Mesh& mesh, const ReferenceElement& ref, std::span<const LocalBlocks> blocks,
                                std::span<const CondensationCache> caches);

CVector solve_multiplier(const CondensedSystem& system, const SolverOptions& options = {},
                         SolveStats* stats = nullptr);

FieldSolution recover_fields(const Mesh& mesh, const ReferenceElement& ref, const CVector& lambda,
                             std::span<const LocalBlocks> blocks, std::span<const CondensationCache> caches);

struct Discretization {
  std::vector<LocalBlocks> blocks;
  std::vector<CondensationCache> caches;
  CondensedSystem system;
};

/// Element assembly, condensation and global accumulation.
Discretization discretize(const Mesh& mesh, const ReferenceElement& ref, Real kappa, const ProblemData& data,
                          const AssemblyOptions& options = {});

struct SolveOptions {
  AssemblyOptions assembly;
  SolverOptions solver;
};

/// assemble -> condense -> global solve -> recover. Errors carry the stage.
FieldSolution solve(const Mesh& mesh, const ReferenceElement& ref, Real kappa, const ProblemData& data,
                    const SolveOptions& options = {}, SolveStats* stats = nullptr);

inline constexpr Index kMonolithicUnknownCap = 200000;

/// Uncondensed block system over (sigma, u, lambda) in GlobalLayout order.
SparseMatrix assemble_monolithic(const Mesh& mesh, const ReferenceElement& ref, std::span<const LocalBlocks> blocks,
                                 CVector* rhs = nullptr);

/// Solves the uncondensed system in one sparse factorization.
FieldSolution solve_monolithic(const Mesh& mesh, const ReferenceElement& ref, Real kappa, const ProblemData& data,
                               const AssemblyOptions& options = {}, Index unknown_cap = kMonolithicUnknownCap);

/// Matrix Market coordinate, complex general.
void write_matrix_market(std::ostream& out, const SparseMatrix& matrix);

/// max_e max_m |sum over both sides of <sigma_h . n, chi_m>_e| over interior edges.
Real flux_jump_residual(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& fields);

}  // namespace hrtmdg
