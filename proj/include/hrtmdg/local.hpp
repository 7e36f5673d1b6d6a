#pragma once

#include <utility>
#include <vector>

#include "hrtmdg/element.hpp"
#include "hrtmdg/mesh.hpp"
#include "hrtmdg/refelem.hpp"

namespace hrtmdg {

/// Helmholtz data: source f~ in  Laplace(u) + kappa^2 u = f~  and Dirichlet
/// data g. Empty functions are read as zero.
struct ProblemData {
  ScalarField source;
  ScalarField boundary;
};

struct AssemblyOptions {
  /// Reciprocal condition estimate of M below which condensation reports a
  /// local resonance.
  Real rcond_threshold = 1e-12;
  /// Test hook: flips the sign of D on odd-numbered cells.
  bool inject_multiplier_sign_error = false;
};

/// Element blocks of
///   [ A   B  D ] [sigma]   [F1]
///   [ B^t E  0 ] [  u  ] = [F2]
///   [ D^t 0  0 ] [ lam ]   [ 0]
/// with
///   A_ij = (i kappa phi_j, phi_i),   B_ij = -(psi_j, div phi_i),
///   E_ij = -(i kappa psi_j, psi_i),  D_im = <chi_m, phi_i . n>,
///   F1_i = -<g, phi_i . n> on boundary edges,  F2_j = -(f, psi_j),  f = i f~ / kappa.
struct LocalBlocks {
  Index cell = -1;
  Real kappa = 0.0;
  CMatrix A, B, D, E;
  CVector F1, F2;
  /// Global multiplier index of each column of D.
  std::vector<Index> multiplier_slots;
};

struct CondensationCache {
  CMatrix M;  // A - B E^{-1} B^t
  Eigen::PartialPivLU<CMatrix> M_lu;
  Real rcond = 0.0;
  CMatrix S;        // D^t M^{-1} D
  CVector G_local;  // D^t M^{-1} (F1 - B E^{-1} F2)
  // sigma = sigma_data - sigma_lambda * lambda ; u = u_data - E^{-1} B^t sigma
  CVector sigma_data;
  CMatrix sigma_lambda;
  CVector u_data;
  CMatrix e_inv_bt;
};

LocalBlocks assemble_local_blocks(const Mesh& mesh, Index cell, const ReferenceTables& matrix_tables,
                                  const ReferenceTables& rhs_tables, Real kappa, const ProblemData& data,
                                  const AssemblyOptions& options = {});

/// Convenience overload building the quadrature tables from `ref`.
LocalBlocks assemble_local_blocks(const Mesh& mesh, Index cell, const ReferenceElement& ref, Real kappa,
                                  const ProblemData& data, const AssemblyOptions& options = {});

/// Raises LocalResonanceError when M is numerically singular.
CondensationCache condense(const LocalBlocks& blocks, const AssemblyOptions& options = {});

/// Recovers (sigma_K, u_K) from the multiplier values on the cell's slots.
std::pair<CVector, CVector> back_substitute(const CVector& lambda_local, const CondensationCache& cache,
                                            const LocalBlocks& blocks);

/// Multiplier DOF layout: interior edge index x mode.
inline Index multiplier_index(Index interior_edge, int mode, int degree) {
  return interior_edge * (degree + 1) + mode;
}

}  // namespace hrtmdg
