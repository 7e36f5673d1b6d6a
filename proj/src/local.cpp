#include "hrtmdg/local.hpp"

#include <cmath>
#include <exception>
#include <string>

namespace hrtmdg {

namespace {

Complex evaluate_data(const ScalarField& fn, const Point& x, Index cell, const char* what) {
  if (!fn) {
    return {0.0, 0.0};
  }
  Complex value;
  try {
    value = fn(x);
  } catch (const std::exception& e) {
    throw Error("cell " + std::to_string(cell) + ": evaluating " + what + " failed: " + e.what());
  }
  if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) {
    throw Error("cell " + std::to_string(cell) + ": " + what + " is not finite at (" + std::to_string(x.x()) +
                ", " + std::to_string(x.y()) + ")");
  }
  return value;
}

}  // namespace

LocalBlocks assemble_local_blocks(const Mesh& mesh, Index cell, const ReferenceTables& matrix_tables,
                                  const ReferenceTables& rhs_tables, Real kappa, const ProblemData& data,
                                  const AssemblyOptions& options) {
  if (!(kappa > 0.0)) {
    throw ConfigError("kappa", "wavenumber must be positive");
  }
  const ReferenceElement& ref = matrix_tables.element();
  const int k = ref.degree();
  const int nrt = ref.dim_rt();
  const int np = ref.dim_pk();
  const int ne = ref.dim_pk_edge();
  const Complex ik = kI * kappa;

  LocalBlocks blocks;
  blocks.cell = cell;
  blocks.kappa = kappa;

  const ElementValues ev(mesh, cell, matrix_tables);
  const auto& in = ev.interior;
  const RMatrix mass_rt = in.rt_x * in.weights.asDiagonal() * in.rt_x.transpose() +
                          in.rt_y * in.weights.asDiagonal() * in.rt_y.transpose();
  const RMatrix mass_p = in.pk * in.weights.asDiagonal() * in.pk.transpose();
  const RMatrix div_p = -(in.rt_div * in.weights.asDiagonal() * in.pk.transpose());
  blocks.A = ik * mass_rt.cast<Complex>();
  blocks.E = -ik * mass_p.cast<Complex>();
  blocks.B = div_p.cast<Complex>();

  int interior_faces = 0;
  for (const auto& f : ev.faces) {
    interior_faces += f.boundary ? 0 : 1;
  }
  RMatrix d = RMatrix::Zero(nrt, interior_faces * ne);
  int col = 0;
  const Real fault = (options.inject_multiplier_sign_error && cell % 2 == 1) ? -1.0 : 1.0;
  for (const auto& f : ev.faces) {
    if (f.boundary) {
      continue;
    }
    d.middleCols(col, ne) = fault * (f.rt_normal * f.weights.asDiagonal() * f.multiplier.transpose());
    const Index interior = mesh.interior_index(f.edge);
    for (int m = 0; m < ne; ++m) {
      blocks.multiplier_slots.push_back(multiplier_index(interior, m, k));
    }
    col += ne;
  }
  blocks.D = d.cast<Complex>();

  // Right-hand sides use the elevated quadrature.
  const ElementValues rv(mesh, cell, rhs_tables);
  blocks.F2 = CVector::Zero(np);
  for (std::size_t q = 0; q < rv.interior.points.size(); ++q) {
    const Complex f = kI * evaluate_data(data.source, rv.interior.points[q], cell, "source") / kappa;
    blocks.F2 -= (rv.interior.weights(q) * f) * rv.interior.pk.col(q).cast<Complex>();
  }
  blocks.F1 = CVector::Zero(nrt);
  for (const auto& f : rv.faces) {
    if (!f.boundary) {
      continue;
    }
    for (std::size_t q = 0; q < f.points.size(); ++q) {
      const Complex g = evaluate_data(data.boundary, f.points[q], cell, "boundary data");
      blocks.F1 -= (f.weights(q) * g) * f.rt_normal.col(q).cast<Complex>();
    }
  }
  return blocks;
}

LocalBlocks assemble_local_blocks(const Mesh& mesh, Index cell, const ReferenceElement& ref, Real kappa,
                                  const ProblemData& data, const AssemblyOptions& options) {
  const ReferenceTables matrix_tables(ref, ref.quad_degree());
  const ReferenceTables rhs_tables(ref, ref.rhs_quad_degree());
  return assemble_local_blocks(mesh, cell, matrix_tables, rhs_tables, kappa, data, options);
}

CondensationCache condense(const LocalBlocks& blocks, const AssemblyOptions& options) {
  // The blocks coupling to the conjugate-transposed rows are real, so their
  // adjoint is the plain transpose used by the symmetric assembly.
  if (!blocks.B.imag().isZero(0.0) || !blocks.D.imag().isZero(0.0)) {
    throw Error("cell " + std::to_string(blocks.cell) + ": B and D blocks must be real");
  }
  CondensationCache cache;
  const Eigen::PartialPivLU<CMatrix> e_lu(blocks.E);
  cache.e_inv_bt = e_lu.solve(CMatrix(blocks.B.adjoint()));
  const CVector e_inv_f2 = e_lu.solve(blocks.F2);

  cache.M = blocks.A - blocks.B * cache.e_inv_bt;
  cache.M_lu.compute(cache.M);
  cache.rcond = cache.M_lu.rcond();
  if (!(cache.rcond >= options.rcond_threshold)) {
    throw LocalResonanceError(blocks.cell, blocks.kappa, cache.rcond);
  }
  cache.sigma_data = cache.M_lu.solve(CVector(blocks.F1 - blocks.B * e_inv_f2));
  cache.sigma_lambda = cache.M_lu.solve(blocks.D);
  cache.S = blocks.D.adjoint() * cache.sigma_lambda;
  cache.G_local = blocks.D.adjoint() * cache.sigma_data;
  cache.u_data = e_inv_f2;
  return cache;
}

std::pair<CVector, CVector> back_substitute(const CVector& lambda_local, const CondensationCache& cache,
                                            const LocalBlocks& blocks) {
  if (lambda_local.size() != blocks.D.cols()) {
    throw Error("cell " + std::to_string(blocks.cell) + ": multiplier vector has size " +
                std::to_string(lambda_local.size()) + ", expected " + std::to_string(blocks.D.cols()));
  }
  CVector sigma = cache.sigma_data;
  if (lambda_local.size() > 0) {
    sigma -= cache.sigma_lambda * lambda_local;
  }
  CVector u = cache.u_data - cache.e_inv_bt * sigma;
  return {std::move(sigma), std::move(u)};
}

}  // namespace hrtmdg
