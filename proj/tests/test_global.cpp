#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "hrtmdg/global.hpp"
#include "test_support.hpp"

namespace hrtmdg {
namespace {

using testing::jittered_mesh;
using testing::multiplier_basis;
using testing::PhysicalBasis;

ProblemData plane_wave_data(Real kappa, Real theta = 0.4) {
  ProblemData data;
  data.boundary = [=](const Point& x) {
    return std::exp(Complex(0, kappa) * (x.x() * std::cos(theta) + x.y() * std::sin(theta)));
  };
  return data;
}

ProblemData mixed_data(Real kappa) {
  ProblemData data = plane_wave_data(kappa);
  data.source = [](const Point& x) { return Complex(std::sin(3 * x.x()), x.y() * x.y()); };
  return data;
}

Real field_distance(const FieldSolution& a, const FieldSolution& b) {
  Real diff = 0.0, norm = 0.0;
  auto accumulate = [&](const std::vector<CVector>& x, const std::vector<CVector>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      diff += (x[i] - y[i]).squaredNorm();
      norm += y[i].squaredNorm();
    }
  };
  accumulate(a.sigma, b.sigma);
  accumulate(a.u, b.u);
  accumulate(a.lambda, b.lambda);
  return std::sqrt(diff / std::max(norm, 1e-300));
}

TEST(AssembleGlobal, SystemSizes) {
  struct Case {
    int n, k;
    Index size;
  };
  for (const auto& c : {Case{1, 0, 1}, Case{2, 0, 8}, Case{2, 1, 16}, Case{4, 1, 80}}) {
    const Mesh mesh = generate_structured(c.n);
    const ReferenceElement ref(c.k);
    const Discretization disc = discretize(mesh, ref, 3.0, {});
    EXPECT_EQ(disc.system.matrix.rows(), c.size);
    EXPECT_EQ(disc.system.matrix.cols(), c.size);
    EXPECT_EQ(disc.system.rhs.size(), c.size);
    EXPECT_EQ(disc.system.dof_map.size(), c.size);
  }
}

TEST(AssembleGlobal, ComplexSymmetric) {
  const Mesh mesh = generate_structured(4);
  const ReferenceElement ref(1);
  const Discretization disc = discretize(mesh, ref, 5.0, plane_wave_data(5.0));
  const CMatrix s = CMatrix(disc.system.matrix);
  EXPECT_LT((s - s.transpose()).norm(), 1e-11 * s.norm());
  // Purely imaginary: S = -i D^t R^{-1} D with R real.
  EXPECT_LT(s.real().norm(), 1e-12 * s.norm());
}

TEST(AssembleGlobal, RejectsInconsistentInput) {
  const Mesh mesh = generate_structured(2);
  const ReferenceElement ref(0);
  Discretization disc = discretize(mesh, ref, 2.0, {});
  std::vector<LocalBlocks> short_blocks(disc.blocks.begin(), disc.blocks.end() - 1);
  std::vector<CondensationCache> short_caches(disc.caches.begin(), disc.caches.end() - 1);
  EXPECT_THROW(assemble_global(mesh, ref, short_blocks, short_caches), Error);
  disc.blocks[0].multiplier_slots[0] = 999;
  EXPECT_THROW(assemble_global(mesh, ref, disc.blocks, disc.caches), Error);
}

TEST(SolveMultiplier, ZeroRightHandSide) {
  const Mesh mesh = generate_structured(3);
  const ReferenceElement ref(1);
  const FieldSolution fields = solve(mesh, ref, 4.0, {});
  for (const auto& v : fields.sigma) EXPECT_TRUE(v.isZero(0.0));
  for (const auto& v : fields.u) EXPECT_TRUE(v.isZero(0.0));
  for (const auto& v : fields.lambda) EXPECT_TRUE(v.isZero(0.0));
}

TEST(SolveMultiplier, SingleUnknown) {
  const Mesh mesh = generate_structured(1);
  const ReferenceElement ref(0);
  const Discretization disc = discretize(mesh, ref, 2.0, plane_wave_data(2.0));
  ASSERT_EQ(disc.system.matrix.rows(), 1);
  const CVector lambda = solve_multiplier(disc.system);
  const Complex expected = disc.system.rhs(0) / disc.system.matrix.coeff(0, 0);
  EXPECT_LT(std::abs(lambda(0) - expected), 1e-15 * std::abs(expected));
}

TEST(SolveMultiplier, DirectAndIterativeAgree) {
  const Mesh mesh = generate_structured(8);
  const ReferenceElement ref(1);
  const Discretization disc = discretize(mesh, ref, 5.0, plane_wave_data(5.0));
  SolveStats direct_stats, iter_stats;
  const CVector direct = solve_multiplier(disc.system, {}, &direct_stats);
  SolverOptions iterative;
  iterative.kind = SolverKind::Iterative;
  const CVector iter = solve_multiplier(disc.system, iterative, &iter_stats);
  EXPECT_LT((direct - iter).norm(), 1e-8 * direct.norm());
  EXPECT_LE(direct_stats.relative_residual, 1e-10);
  EXPECT_GT(direct_stats.rcond_estimate, 1e-12);
  EXPECT_GT(iter_stats.iterations, 0);
  EXPECT_EQ(iter_stats.unknowns, disc.system.matrix.rows());
}

TEST(SolveMultiplier, ConjugateGradientNeedsExplicitOptIn) {
  const Mesh mesh = generate_structured(4);
  const ReferenceElement ref(0);
  const Discretization disc = discretize(mesh, ref, 5.0, plane_wave_data(5.0));
  SolverOptions cg;
  cg.kind = SolverKind::ConjugateGradient;
  EXPECT_THROW(solve_multiplier(disc.system, cg), ConfigError);
  cg.trust_paper_claim = true;
  cg.max_iterations = 500;
  // The system is not Hermitian, so either outcome is legitimate; the solver
  // must not return an unconverged vector silently.
  try {
    SolveStats stats;
    const CVector x = solve_multiplier(disc.system, cg, &stats);
    EXPECT_LE(stats.relative_residual, 10 * cg.tolerance);
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.iterations(), 0);
  }
}

TEST(SolverKind, StringRoundTrip) {
  for (auto kind : {SolverKind::Direct, SolverKind::Iterative, SolverKind::ConjugateGradient}) {
    EXPECT_EQ(solver_kind_from_string(to_string(kind)), kind);
  }
  EXPECT_EQ(to_string(SolverKind::ConjugateGradient), "cg-experimental");
  EXPECT_THROW(solver_kind_from_string("gmres"), ConfigError);
}

TEST(Solve, CondensedMatchesMonolithic) {
  for (int n : {1, 2, 4, 8}) {
    const Mesh mesh = generate_structured(n);
    for (int k : {0, 1}) {
      const ReferenceElement ref(k);
      for (Real kappa : {1.0, 5.0}) {
        const ProblemData data = mixed_data(kappa);
        const FieldSolution condensed = solve(mesh, ref, kappa, data);
        const FieldSolution mono = solve_monolithic(mesh, ref, kappa, data);
        EXPECT_LT(field_distance(condensed, mono), 1e-10) << "n=" << n << " k=" << k << " kappa=" << kappa;
      }
    }
  }
}

TEST(Solve, MonolithicUnknownCap) {
  const Mesh mesh = generate_structured(4);
  const ReferenceElement ref(0);
  EXPECT_THROW(solve_monolithic(mesh, ref, 1.0, {}, {}, 10), ConfigError);
}

TEST(Solve, AllThreeBlockRowsHold) {
  const Mesh mesh = jittered_mesh(4, 0.2, 12);
  for (int k : {0, 1, 2}) {
    const ReferenceElement ref(k);
    const Real kappa = 4.0;
    const Discretization disc = discretize(mesh, ref, kappa, mixed_data(kappa));
    const CVector lambda = solve_multiplier(disc.system);
    const FieldSolution fields = recover_fields(mesh, ref, lambda, disc.blocks, disc.caches);
    Real scale = 0.0;
    CVector jump = CVector::Zero(lambda.size());
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      const LocalBlocks& blk = disc.blocks[c];
      CVector lam(blk.multiplier_slots.size());
      for (std::size_t j = 0; j < blk.multiplier_slots.size(); ++j) {
        lam(static_cast<Index>(j)) = lambda(blk.multiplier_slots[j]);
      }
      const CVector r1 = blk.A * fields.sigma[c] + blk.B * fields.u[c] + blk.D * lam - blk.F1;
      const CVector r2 = blk.B.adjoint() * fields.sigma[c] + blk.E * fields.u[c] - blk.F2;
      const Real s = (blk.A * fields.sigma[c]).norm() + (blk.B * fields.u[c]).norm() + blk.F1.norm() +
                     blk.F2.norm();
      EXPECT_LT(r1.norm(), 1e-10 * s);
      EXPECT_LT(r2.norm(), 1e-10 * s);
      const CVector dts = blk.D.adjoint() * fields.sigma[c];
      for (std::size_t j = 0; j < blk.multiplier_slots.size(); ++j) {
        jump(blk.multiplier_slots[j]) += dts(static_cast<Index>(j));
      }
      scale = std::max(scale, dts.cwiseAbs().maxCoeff());
    }
    EXPECT_LT(jump.cwiseAbs().maxCoeff(), 1e-10 * scale) << "k=" << k;
  }
}

TEST(Solve, FluxJumpResidualSmall) {
  const Mesh mesh = generate_structured(4);
  const ReferenceElement ref(0);
  const FieldSolution fields = solve(mesh, ref, 5.0, plane_wave_data(5.0));
  Real scale = 0.0;
  for (const auto& s : fields.sigma) {
    scale = std::max(scale, s.cwiseAbs().maxCoeff());
  }
  EXPECT_LT(flux_jump_residual(mesh, ref, fields), 1e-10 * scale);
}

TEST(Solve, ConstantSolutionIsExact) {
  const Mesh mesh = jittered_mesh(3, 0.2, 8);
  for (int k = 0; k <= 3; ++k) {
    const ReferenceElement ref(k, -1, -1, 3);
    const Real kappa = 3.0;
    ProblemData data;
    data.source = [=](const Point&) { return Complex(kappa * kappa, 0.0); };
    data.boundary = [](const Point&) { return Complex(1.0, 0.0); };
    for (const FieldSolution& f : {solve(mesh, ref, kappa, data), solve_monolithic(mesh, ref, kappa, data)}) {
      for (Index c = 0; c < mesh.num_cells(); ++c) {
        EXPECT_LT(f.sigma[c].norm(), 1e-11);
        CVector expected = CVector::Zero(ref.dim_pk());
        expected(0) = std::sqrt(mesh.cell_area(c));
        EXPECT_LT((f.u[c] - expected).norm(), 1e-11) << "k=" << k;
      }
      for (Index e = 0; e < mesh.num_edges(); ++e) {
        CVector expected = CVector::Zero(ref.dim_pk_edge());
        if (!mesh.edges()[e].boundary) {
          expected(0) = std::sqrt(mesh.edges()[e].length);
        }
        EXPECT_LT((f.lambda[e] - expected).norm(), 1e-11);
      }
    }
  }
}

TEST(Solve, LinearSolutionIsExactFromDegreeOne) {
  const Mesh mesh = jittered_mesh(3, 0.2, 10);
  const Real kappa = 2.5;
  ProblemData data;
  data.source = [=](const Point& x) { return Complex(kappa * kappa * x.x(), 0.0); };
  data.boundary = [](const Point& x) { return Complex(x.x(), 0.0); };
  for (int k : {1, 2}) {
    const ReferenceElement ref(k);
    const FieldSolution f = solve(mesh, ref, kappa, data);
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      const PhysicalBasis basis(mesh, c, ref);
      basis.integrate(4, [&](const Point& x, Real) {
        const Complex u = basis.pk(x).cast<Complex>().dot(f.u[c]);
        EXPECT_LT(std::abs(u - x.x()), 1e-11);
        const VectorTable phi = basis.rt(x);
        const Complex sx = (phi.col(0).cast<Complex>().transpose() * f.sigma[c])(0);
        const Complex sy = (phi.col(1).cast<Complex>().transpose() * f.sigma[c])(0);
        EXPECT_LT(std::abs(sx - Complex(0, 1.0 / kappa)), 1e-11);
        EXPECT_LT(std::abs(sy), 1e-11);
      });
    }
    for (Index e = 0; e < mesh.num_edges(); ++e) {
      const Edge& edge = mesh.edges()[e];
      if (edge.boundary) {
        continue;
      }
      const Point a = mesh.vertices()[edge.vertices[0]], b = mesh.vertices()[edge.vertices[1]];
      for (Real t : {0.1, 0.5, 0.8}) {
        const Point x = a + t * (b - a);
        const Complex lam = multiplier_basis(mesh, e, ref, x).cast<Complex>().dot(f.lambda[e]);
        EXPECT_LT(std::abs(lam - x.x()), 1e-11);
      }
    }
  }
  // Degree zero cannot represent u = x.
  const FieldSolution f0 = solve(mesh, ReferenceElement(0), kappa, data);
  EXPECT_GT(f0.sigma[0].norm(), 1e-6);
}

TEST(Solve, Superposition) {
  const Mesh mesh = jittered_mesh(4, 0.2, 14);
  const ReferenceElement ref(1);
  const Real kappa = 3.0;
  const ProblemData d1 = plane_wave_data(kappa, 0.2);
  ProblemData d2;
  d2.source = [](const Point& x) { return Complex(x.x() * x.y(), 1.0); };
  const Complex a(0.5, 2.0), b(-1.0, 0.25);
  ProblemData combo;
  combo.source = [&](const Point& x) { return b * d2.source(x); };
  combo.boundary = [&](const Point& x) { return a * d1.boundary(x); };
  const FieldSolution f1 = solve(mesh, ref, kappa, d1);
  const FieldSolution f2 = solve(mesh, ref, kappa, d2);
  const FieldSolution fc = solve(mesh, ref, kappa, combo);
  FieldSolution expected = f1;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    expected.sigma[c] = a * f1.sigma[c] + b * f2.sigma[c];
    expected.u[c] = a * f1.u[c] + b * f2.u[c];
  }
  for (Index e = 0; e < mesh.num_edges(); ++e) {
    expected.lambda[e] = a * f1.lambda[e] + b * f2.lambda[e];
  }
  EXPECT_LT(field_distance(fc, expected), 1e-11);
}

TEST(Solve, AssemblyIsBitReproducible) {
  const Mesh mesh = jittered_mesh(5, 0.2, 15);
  const ReferenceElement ref(1);
  const Discretization d1 = discretize(mesh, ref, 5.0, mixed_data(5.0));
  const Discretization d2 = discretize(mesh, ref, 5.0, mixed_data(5.0));
  std::ostringstream s1, s2;
  write_matrix_market(s1, d1.system.matrix);
  write_matrix_market(s2, d2.system.matrix);
  EXPECT_EQ(s1.str(), s2.str());
  EXPECT_TRUE((d1.system.rhs.array() == d2.system.rhs.array()).all());
}

TEST(MatrixMarket, CoordinateComplexGeneral) {
  const Mesh mesh = generate_structured(2);
  const ReferenceElement ref(0);
  const Discretization disc = discretize(mesh, ref, 2.0, {});
  std::ostringstream out;
  write_matrix_market(out, disc.system.matrix);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "%%MatrixMarket matrix coordinate complex general");
  Index rows, cols, nnz;
  in >> rows >> cols >> nnz;
  EXPECT_EQ(rows, 8);
  EXPECT_EQ(cols, 8);
  EXPECT_EQ(nnz, disc.system.matrix.nonZeros());
  CMatrix back = CMatrix::Zero(rows, cols);
  for (Index i = 0; i < nnz; ++i) {
    Index r, c;
    Real re, im;
    in >> r >> c >> re >> im;
    back(r - 1, c - 1) = Complex(re, im);
  }
  EXPECT_TRUE(back == CMatrix(disc.system.matrix));
}

// Locates a kappa where the condensed matrix is singular by bisection on the
// determinant of the real symmetric matrix i S, then checks the solver
// refuses to return a solution there.
TEST(Solve, DetectsGlobalResonance) {
  const Mesh mesh = generate_structured(2);
  const ReferenceElement ref(0);
  auto real_part = [&](Real kappa) -> std::optional<RMatrix> {
    try {
      const Discretization disc = discretize(mesh, ref, kappa, {});
      return RMatrix(-CMatrix(disc.system.matrix).imag());
    } catch (const LocalResonanceError&) {
      return std::nullopt;
    }
  };
  auto det = [&](Real kappa) { return real_part(kappa).value().determinant(); };
  int found = 0;
  Real prev_kappa = 1.0;
  auto prev = real_part(prev_kappa);
  for (Real kappa = 1.05; kappa < 12.0 && found == 0; kappa += 0.05) {
    const auto cur = real_part(kappa);
    if (prev && cur && (prev->determinant() > 0) != (cur->determinant() > 0)) {
      Real lo = prev_kappa, hi = kappa;
      const bool lo_positive = det(lo) > 0;
      for (int it = 0; it < 80; ++it) {
        const Real mid = 0.5 * (lo + hi);
        ((det(mid) > 0) == lo_positive ? lo : hi) = mid;
      }
      const RMatrix t = real_part(lo).value();
      const RVector sv = Eigen::JacobiSVD<RMatrix>(t).singularValues();
      if (sv.minCoeff() < 1e-9 * sv.maxCoeff()) {
        ++found;
        ProblemData data = plane_wave_data(lo);
        EXPECT_THROW(solve(mesh, ref, lo, data), GlobalResonanceError) << "kappa=" << lo;
        EXPECT_NO_THROW(solve(mesh, ref, lo + 0.02, data));
      }
    }
    prev = cur;
    prev_kappa = kappa;
  }
  EXPECT_EQ(found, 1);
}

TEST(Solve, ErrorsCarryStage) {
  const Mesh mesh = generate_structured(2);
  const ReferenceElement ref(0);
  ProblemData bad;
  bad.source = [](const Point&) -> Complex { throw std::runtime_error("no data"); };
  try {
    solve(mesh, ref, 1.0, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("assembl"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace hrtmdg
