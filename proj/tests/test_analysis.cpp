#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hrtmdg/analysis.hpp"
#include "hrtmdg/mms.hpp"
#include "test_support.hpp"

namespace hrtmdg {
namespace {

using testing::jittered_mesh;
using testing::multiplier_basis;
using testing::PhysicalBasis;

// Random complex polynomial of total degree <= p.
ScalarField random_polynomial(int p, std::mt19937_64& rng) {
  std::normal_distribution<Real> normal;
  std::vector<std::tuple<int, int, Complex>> terms;
  for (int a = 0; a <= p; ++a) {
    for (int b = 0; a + b <= p; ++b) {
      terms.emplace_back(a, b, Complex(normal(rng), normal(rng)));
    }
  }
  return [terms](const Point& x) {
    Complex v = 0.0;
    for (const auto& [a, b, c] : terms) {
      v += c * std::pow(x.x(), a) * std::pow(x.y(), b);
    }
    return v;
  };
}

CVector random_cvector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<Real> normal;
  CVector v(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = Complex(normal(rng), normal(rng));
  }
  return v;
}

FieldSolution random_fields(const Mesh& mesh, const ReferenceElement& ref, Real kappa, std::mt19937_64& rng,
                            bool real = false) {
  const GlobalLayout layout(mesh, ref);
  CVector x = random_cvector(layout.size(), rng);
  if (real) {
    x = x.real().cast<Complex>();
  }
  return unpack(mesh, layout, x, ref.degree(), kappa);
}

// Gauss points on a physical edge from a to b.
template <class F>
void integrate_segment(const Point& a, const Point& b, int degree, F&& body) {
  const EdgeRule rule = quadrature_edge(degree);
  const Real len = (b - a).norm();
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    body(a + rule.points[q] * (b - a), rule.weights[q] * len);
  }
}

ManufacturedCase wavy_case(Real kappa) {
  // Not a Helmholtz solution of any simple form, only used for projections.
  ManufacturedCase c = plane_wave(kappa, 0.3);
  c.u = [kappa](const Point& x) { return Complex(std::cos(kappa * x.x() * x.y()), std::sin(2.0 * x.y())); };
  c.grad_u = [kappa](const Point& x) -> CVec2 {
    const Real s = -std::sin(kappa * x.x() * x.y()) * kappa;
    return CVec2(Complex(s * x.y(), 0.0), Complex(s * x.x(), 2.0 * std::cos(2.0 * x.y())));
  };
  c.sigma = [](const Point& x) -> CVec2 {
    return CVec2(Complex(std::exp(x.x()) * x.y(), x.x()), Complex(std::sin(3.0 * x.y()), x.x() * x.x()));
  };
  c.div_sigma = [](const Point& x) {
    return Complex(std::exp(x.x()) * x.y() + 3.0 * std::cos(3.0 * x.y()), 1.0);
  };
  return c;
}

TEST(Projection, PkReproducesPolynomialsAndIsIdempotent) {
  std::mt19937_64 rng(1);
  const Mesh mesh = jittered_mesh(3, 0.3, 5);
  for (int k = 0; k <= 3; ++k) {
    const ReferenceElement ref(k);
    const ScalarField p = random_polynomial(k, rng);
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      const CVector coeff = project_pk(p, mesh, c, ref);
      const PhysicalBasis basis(mesh, c, ref);
      const Point x = (mesh.vertex(c, 0) + 2.0 * mesh.vertex(c, 1) + mesh.vertex(c, 2)) / 4.0;
      const Complex value = basis.pk(x).cast<Complex>().dot(coeff);
      EXPECT_NEAR(std::abs(value - p(x)), 0.0, 1e-12 * std::max(1.0, std::abs(p(x))));
      const ScalarField discrete = [&](const Point& y) { return basis.pk(y).cast<Complex>().dot(coeff); };
      EXPECT_LT((project_pk(discrete, mesh, c, ref) - coeff).norm(), 1e-12 * coeff.norm());
    }
  }
}

TEST(Projection, PkResidualIsOrthogonal) {
  const Mesh mesh = jittered_mesh(2, 0.3, 9);
  const ScalarField f = [](const Point& x) { return std::exp(Complex(x.x(), 2.0 * x.y())); };
  for (int k = 0; k <= 2; ++k) {
    const ReferenceElement ref(k);
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      const CVector coeff = project_pk(f, mesh, c, ref);
      const PhysicalBasis basis(mesh, c, ref);
      CVector residual = CVector::Zero(ref.dim_pk());
      basis.integrate(30, [&](const Point& x, Real w) {
        const RVector psi = basis.pk(x);
        const Complex r = f(x) - psi.cast<Complex>().dot(coeff);
        residual += (w * r) * psi.cast<Complex>();
      });
      EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-13);
    }
  }
}

TEST(Projection, EdgeResidualIsOrthogonal) {
  const Mesh mesh = jittered_mesh(2, 0.3, 4);
  const ScalarField f = [](const Point& x) { return Complex(std::sin(4.0 * x.x() + x.y()), x.x() * x.y()); };
  for (int k = 0; k <= 3; ++k) {
    const ReferenceElement ref(k);
    for (Index e = 0; e < mesh.num_edges(); ++e) {
      const CVector coeff = project_edge(f, mesh, e, ref);
      const Edge& edge = mesh.edges()[e];
      CVector residual = CVector::Zero(ref.dim_pk_edge());
      integrate_segment(mesh.vertices()[edge.vertices[0]], mesh.vertices()[edge.vertices[1]], 40,
                        [&](const Point& x, Real w) {
                          const RVector chi = multiplier_basis(mesh, e, ref, x);
                          residual += (w * (f(x) - chi.cast<Complex>().dot(coeff))) * chi.cast<Complex>();
                        });
      EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-13);
    }
  }
}

TEST(Projection, RtReproducesRtFunctions) {
  std::mt19937_64 rng(3);
  const Mesh mesh = jittered_mesh(2, 0.3, 8);
  for (int k = 0; k <= 3; ++k) {
    const ReferenceElement ref(k);
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      const PhysicalBasis basis(mesh, c, ref);
      const CVector coeff = random_cvector(ref.dim_rt(), rng);
      const VectorField field = [&](const Point& x) -> CVec2 {
        const VectorTable phi = basis.rt(x);
        return CVec2(phi.col(0).cast<Complex>().dot(coeff),
                     phi.col(1).cast<Complex>().dot(coeff));
      };
      EXPECT_LT((project_rt(field, mesh, c, ref) - coeff).norm(), 1e-11 * coeff.norm()) << "k=" << k;
    }
  }
}

TEST(Projection, RtMomentsMatch) {
  const Mesh mesh = jittered_mesh(2, 0.25, 12);
  const VectorField sigma = wavy_case(3.0).sigma;
  for (int k = 0; k <= 2; ++k) {
    const ReferenceElement ref(k);
    const int nl = ref.dim_pk_lower();
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      const CVector coeff = project_rt(sigma, mesh, c, ref);
      const PhysicalBasis basis(mesh, c, ref);
      auto diff = [&](const Point& x) -> CVec2 {
        const VectorTable phi = basis.rt(x);
        const CVec2 ph(phi.col(0).cast<Complex>().dot(coeff),
                       phi.col(1).cast<Complex>().dot(coeff));
        return sigma(x) - ph;
      };
      for (int l = 0; l < 3; ++l) {
        const Point a = mesh.vertex(c, l), b = mesh.vertex(c, (l + 1) % 3);
        const Point n = Point(b.y() - a.y(), a.x() - b.x()).normalized();
        const Index e = mesh.cell_edges(c)[l].edge;
        CVector moments = CVector::Zero(ref.dim_pk_edge());
        integrate_segment(a, b, 40, [&](const Point& x, Real w) {
          const CVec2 d = diff(x);
          moments += (w * (d(0) * n.x() + d(1) * n.y())) * multiplier_basis(mesh, e, ref, x).cast<Complex>();
        });
        EXPECT_LT(moments.cwiseAbs().maxCoeff(), 1e-13);
      }
      if (nl > 0) {
        CVector mx = CVector::Zero(nl), my = CVector::Zero(nl);
        basis.integrate(36, [&](const Point& x, Real w) {
          const CVec2 d = diff(x);
          const RVector p = basis.pk(x).head(nl);
          mx += (w * d(0)) * p.cast<Complex>();
          my += (w * d(1)) * p.cast<Complex>();
        });
        EXPECT_LT(std::max(mx.cwiseAbs().maxCoeff(), my.cwiseAbs().maxCoeff()), 1e-13);
      }
    }
  }
}

TEST(Projection, CommutingDiagram) {
  const Mesh mesh = jittered_mesh(3, 0.3, 2);
  const ManufacturedCase c = wavy_case(2.0);
  for (int k = 0; k <= 2; ++k) {
    const ReferenceElement ref(k);
    for (Index cell = 0; cell < mesh.num_cells(); ++cell) {
      const CVector rt = project_rt(c.sigma, mesh, cell, ref);
      const CVector pk = project_pk(c.div_sigma, mesh, cell, ref);
      const PhysicalBasis basis(mesh, cell, ref);
      // div of the RT interpolant expressed in the P_k basis by L2 projection.
      CVector div = CVector::Zero(ref.dim_pk());
      basis.integrate(2 * k + 2, [&](const Point& x, Real w) {
        div += (w * basis.rt_div(x).cast<Complex>().dot(rt)) * basis.pk(x).cast<Complex>();
      });
      EXPECT_LT((div - pk).norm(), 1e-11 * pk.norm()) << "k=" << k;
    }
  }
}

TEST(Evaluate, MatchesPhysicalBasis) {
  std::mt19937_64 rng(7);
  const Mesh mesh = jittered_mesh(2, 0.3, 1);
  const ReferenceElement ref(2);
  const FieldSolution f = random_fields(mesh, ref, 2.0, rng);
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const PhysicalBasis basis(mesh, c, ref);
    const Point x = (mesh.vertex(c, 0) + mesh.vertex(c, 1) + 3.0 * mesh.vertex(c, 2)) / 5.0;
    EXPECT_NEAR(std::abs(evaluate_u(mesh, ref, f, c, x) - basis.pk(x).cast<Complex>().dot(f.u[c])), 0.0,
                1e-12);
    const VectorTable phi = basis.rt(x);
    const CVec2 s = evaluate_sigma(mesh, ref, f, c, x);
    EXPECT_NEAR(std::abs(s(0) - phi.col(0).cast<Complex>().dot(f.sigma[c])), 0.0, 1e-11);
    EXPECT_NEAR(std::abs(s(1) - phi.col(1).cast<Complex>().dot(f.sigma[c])), 0.0, 1e-11);
  }
  for (Index e = 0; e < mesh.num_edges(); ++e) {
    const Edge& edge = mesh.edges()[e];
    const Point x = 0.3 * mesh.vertices()[edge.vertices[0]] + 0.7 * mesh.vertices()[edge.vertices[1]];
    const Complex expected =
        edge.boundary ? Complex(0.0) : multiplier_basis(mesh, e, ref, x).cast<Complex>().dot(f.lambda[e]);
    EXPECT_NEAR(std::abs(evaluate_lambda(mesh, ref, f, e, x) - expected), 0.0, 1e-12);
  }
}

TEST(Norms, UnitFunctionHasUnitNorm) {
  const Mesh mesh = jittered_mesh(4, 0.3, 3);
  const ReferenceElement ref(1);
  std::vector<CVector> u(mesh.num_cells(), CVector::Zero(ref.dim_pk()));
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    u[c](0) = std::sqrt(mesh.cell_area(c));
  }
  EXPECT_NEAR(broken_l2_norm_u(mesh, ref, u), 1.0, 1e-13);
  const ScalarField one = [](const Point&) { return Complex(1.0); };
  EXPECT_LT(broken_l2_norm_u(mesh, ref, u, one), 1e-13);
}

TEST(Norms, AgreeWithIndependentQuadrature) {
  std::mt19937_64 rng(11);
  const Mesh mesh = jittered_mesh(3, 0.3, 6);
  const ReferenceElement ref(1);
  const FieldSolution f = random_fields(mesh, ref, 1.0, rng);
  const ManufacturedCase c = wavy_case(2.0);
  Real u2 = 0.0, s2 = 0.0;
  for (Index cell = 0; cell < mesh.num_cells(); ++cell) {
    const PhysicalBasis basis(mesh, cell, ref);
    basis.integrate(40, [&](const Point& x, Real w) {
      u2 += w * std::norm(basis.pk(x).cast<Complex>().dot(f.u[cell]) - c.u(x));
      const VectorTable phi = basis.rt(x);
      const CVec2 s = c.sigma(x);
      s2 += w * std::norm(phi.col(0).cast<Complex>().dot(f.sigma[cell]) - s(0));
      s2 += w * std::norm(phi.col(1).cast<Complex>().dot(f.sigma[cell]) - s(1));
    });
  }
  EXPECT_NEAR(broken_l2_norm_u(mesh, ref, f.u, c.u), std::sqrt(u2), 1e-12 * std::sqrt(u2));
  EXPECT_NEAR(broken_l2_norm_sigma(mesh, ref, f.sigma, c.sigma), std::sqrt(s2), 1e-12 * std::sqrt(s2));
}

TEST(EnergyNorm, HandValueForUnitScalar) {
  for (int n : {1, 2, 4}) {
    const Mesh mesh = generate_structured(n);
    const ReferenceElement ref(1);
    const Real h = mesh.h();
    for (Real kappa : {1.0, 3.0}) {
      // u = 1, lambda = 1 on interior edges: only boundary edges contribute
      // to the trace mismatch, and the boundary has length 4.
      ManufacturedCase one = polynomial_case(0, kappa);
      FieldSolution x = project_solution(mesh, ref, one);
      for (auto& s : x.sigma) {
        s.setZero();
      }
      EXPECT_NEAR(energy_norm(mesh, ref, x, kappa, h), std::sqrt(kappa + 4.0 / (kappa * h)), 1e-12);
      // Without lambda every cell boundary contributes: 2 n^2 cells with
      // perimeter (2 + sqrt 2) / n.
      for (auto& l : x.lambda) {
        l.setZero();
      }
      const Real perimeter = 2.0 * n * (2.0 + std::sqrt(2.0));
      EXPECT_NEAR(energy_norm(mesh, ref, x, kappa, h), std::sqrt(kappa + perimeter / (kappa * h)), 1e-12);
    }
  }
}

TEST(EnergyNorm, GramIsSymmetricPositiveAndHomogeneous) {
  std::mt19937_64 rng(5);
  const Mesh mesh = jittered_mesh(3, 0.2, 4);
  for (int k = 0; k <= 2; ++k) {
    const ReferenceElement ref(k);
    const RMatrix g(energy_gram(mesh, ref, 2.0, mesh.h()));
    EXPECT_LT((g - g.transpose()).norm(), 1e-13 * g.norm());
    EXPECT_EQ(Eigen::LLT<RMatrix>(g).info(), Eigen::Success);
    const FieldSolution x = random_fields(mesh, ref, 2.0, rng);
    FieldSolution y = x;
    const Complex alpha(-1.5, 2.0);
    for (auto* part : {&y.sigma, &y.u, &y.lambda}) {
      for (auto& v : *part) {
        v *= alpha;
      }
    }
    const Real nx = energy_norm(mesh, ref, x, 2.0, mesh.h());
    EXPECT_NEAR(energy_norm(mesh, ref, y, 2.0, mesh.h()), std::abs(alpha) * nx, 1e-12 * nx);
  }
}

TEST(FormA, MatchesMonolithicMatrix) {
  std::mt19937_64 rng(17);
  const Mesh mesh = jittered_mesh(3, 0.3, 21);
  for (int k = 0; k <= 2; ++k) {
    const ReferenceElement ref(k);
    const Real kappa = 2.5;
    const Discretization disc = discretize(mesh, ref, kappa, {});
    const SparseMatrix kmat = assemble_monolithic(mesh, ref, disc.blocks);
    const GlobalLayout layout(mesh, ref);
    for (int trial = 0; trial < 5; ++trial) {
      const FieldSolution x = random_fields(mesh, ref, kappa, rng);
      const FieldSolution y = random_fields(mesh, ref, kappa, rng);
      const Complex expected = pack(mesh, layout, y).dot(kmat * pack(mesh, layout, x));
      const Complex value = evaluate_form_A(mesh, ref, x, y, kappa);
      EXPECT_LT(std::abs(value - expected), 1e-11 * std::abs(expected)) << "k=" << k;
    }
  }
}

FieldSolution rotate_test(FieldSolution x) {
  for (auto& v : x.sigma) {
    v *= kI;
  }
  for (auto& v : x.u) {
    v *= -kI;
  }
  for (auto& v : x.lambda) {
    v *= -kI;
  }
  return x;
}

TEST(FormA, RotatedTestGivesMassesForRealTriples) {
  std::mt19937_64 rng(23);
  const Mesh mesh = jittered_mesh(4, 0.2, 2);
  const ReferenceElement ref(1);
  const Real kappa = 3.0;
  for (int trial = 0; trial < 20; ++trial) {
    const FieldSolution x = random_fields(mesh, ref, kappa, rng, true);
    const Real s = broken_l2_norm_sigma(mesh, ref, x.sigma);
    const Real u = broken_l2_norm_u(mesh, ref, x.u);
    const Real expected = kappa * (s * s + u * u);
    const Complex value = evaluate_form_A(mesh, ref, x, rotate_test(x), kappa);
    EXPECT_LT(std::abs(value - expected), 1e-12 * expected);
  }
}

TEST(FormA, RotatedTestForComplexTriplesPicksUpImaginaryCoupling) {
  // For complex triples the coupling terms no longer cancel:
  //   A(x; i sigma, -i u, -i lambda) = kappa ||sigma||^2 + kappa ||u||^2
  //                                    - 2 Im[(sigma, grad u) + <sigma.n, lambda - u>].
  std::mt19937_64 rng(29);
  const Mesh mesh = jittered_mesh(2, 0.2, 6);
  const ReferenceElement ref(1);
  const Real kappa = 2.0;
  for (int trial = 0; trial < 5; ++trial) {
    const FieldSolution x = random_fields(mesh, ref, kappa, rng);
    Complex coupling = 0.0;
    Real mass = 0.0;
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      const PhysicalBasis basis(mesh, c, ref);
      auto sigma_at = [&](const Point& p) -> CVec2 {
        const VectorTable phi = basis.rt(p);
        return CVec2(phi.col(0).cast<Complex>().dot(x.sigma[c]),
                     phi.col(1).cast<Complex>().dot(x.sigma[c]));
      };
      auto u_at = [&](const Point& p) { return basis.pk(p).cast<Complex>().dot(x.u[c]); };
      basis.integrate(8, [&](const Point& p, Real w) {
        const CVec2 s = sigma_at(p);
        const VectorTable g = basis.grad_pk(p);
        const CVec2 grad(g.col(0).cast<Complex>().dot(x.u[c]),
                         g.col(1).cast<Complex>().dot(x.u[c]));
        coupling += w * (s(0) * std::conj(grad(0)) + s(1) * std::conj(grad(1)));
        mass += w * kappa * (s.squaredNorm() + std::norm(u_at(p)));
      });
      for (int l = 0; l < 3; ++l) {
        const Point a = mesh.vertex(c, l), b = mesh.vertex(c, (l + 1) % 3);
        const Point n = Point(b.y() - a.y(), a.x() - b.x()).normalized();
        const Index e = mesh.cell_edges(c)[l].edge;
        const bool boundary = mesh.edges()[e].boundary;
        integrate_segment(a, b, 8, [&](const Point& p, Real w) {
          const CVec2 s = sigma_at(p);
          const Complex lambda =
              boundary ? Complex(0.0) : multiplier_basis(mesh, e, ref, p).cast<Complex>().dot(x.lambda[e]);
          coupling += w * (s(0) * n.x() + s(1) * n.y()) * std::conj(lambda - u_at(p));
        });
      }
    }
    const Complex expected = mass - 2.0 * coupling.imag();
    const Complex value = evaluate_form_A(mesh, ref, x, rotate_test(x), kappa);
    EXPECT_LT(std::abs(value - expected), 1e-11 * mass);
    EXPECT_GT(std::abs(coupling.imag()), 1e-3 * mass);
  }
}

TEST(Consistency, ExactSolutionsAndProjectedErrors) {
  const Mesh mesh = jittered_mesh(4, 0.25, 31);
  for (int k = 0; k <= 2; ++k) {
    const ReferenceElement ref(k);
    for (const ManufacturedCase& c : {plane_wave(5.0), sine_product(3.0), polynomial_case(3, 2.0)}) {
      const ConsistencyReport r = check_consistency(c, mesh, ref);
      EXPECT_TRUE(r.passed()) << c.name << " k=" << k << " exact " << r.exact_residual << " v " << r.v_residual
                              << " mu " << r.mu_residual << " tau " << r.tau_residual;
      EXPECT_GT(r.exact_scale, 0.1);
    }
  }
}

TEST(Consistency, DetectsWrongSource) {
  const Mesh mesh = generate_structured(4);
  const ReferenceElement ref(1);
  ManufacturedCase c = sine_product(3.0);
  const ScalarField source = c.source;
  c.source = [source](const Point& x) { return 1.01 * source(x); };
  EXPECT_FALSE(check_consistency(c, mesh, ref).passed());
}

TEST(Conservation, HoldsForSolvedFields) {
  for (int k = 0; k <= 2; ++k) {
    const Mesh mesh = jittered_mesh(6, 0.2, 13);
    const ReferenceElement ref(k);
    const ManufacturedCase c = sine_product(5.0);
    const FieldSolution f = solve(mesh, ref, 5.0, c.data());
    const ConservationReport r = check_conservation(mesh, ref, f, c.source);
    EXPECT_TRUE(r.passed()) << "k=" << k << " local " << r.max_local << " global " << r.global_residual;
    EXPECT_EQ(static_cast<Index>(r.residuals.size()), mesh.num_cells());
    // With continuous fluxes the cell residuals add up to the global one.
    EXPECT_NEAR(r.sum_abs, r.global_residual, 1e-10 * r.global_scale);
  }
}

TEST(Conservation, SignMutationIsCaught) {
  const Mesh mesh = generate_structured(8);
  const ReferenceElement ref(1);
  const ManufacturedCase c = sine_product(5.0);
  SolveOptions options;
  options.assembly.inject_multiplier_sign_error = true;
  const FieldSolution f = solve(mesh, ref, 5.0, c.data(), options);
  const ConservationReport r = check_conservation(mesh, ref, f, c.source);
  EXPECT_FALSE(r.passed());
  EXPECT_GT(r.jump, 1e-6 * r.jump_scale);
}

TEST(Lifting, MomentsAreMatched) {
  const Mesh mesh = jittered_mesh(4, 0.2, 3);
  for (int k = 0; k <= 2; ++k) {
    const ReferenceElement ref(k);
    const LiftingSample sample = random_lifting_sample(mesh, ref, mesh.h(), 9);
    const LiftingProbeResult r = lifting_probe(mesh, ref, sample, mesh.h());
    EXPECT_LT(r.moment_residual, 1e-11);
    // Independent check of the edge moments on one cell.
    const Index c = 5;
    const PhysicalBasis basis(mesh, c, ref);
    for (int l = 0; l < 3; ++l) {
      const Point a = mesh.vertex(c, l), b = mesh.vertex(c, (l + 1) % 3);
      const Point n = Point(b.y() - a.y(), a.x() - b.x()).normalized();
      const Index e = mesh.cell_edges(c)[l].edge;
      CVector moments = CVector::Zero(ref.dim_pk_edge());
      integrate_segment(a, b, 2 * k + 2, [&](const Point& x, Real w) {
        const VectorTable phi = basis.rt(x);
        const Complex flux = (phi.col(0) * n.x() + phi.col(1) * n.y()).cast<Complex>().dot(r.tau_tilde[c]);
        moments += (w * flux) * multiplier_basis(mesh, e, ref, x).cast<Complex>();
      });
      EXPECT_LT((moments - sample.mu[c][l]).norm(), 1e-11 * std::max(1.0, sample.mu[c][l].norm()));
    }
  }
}

TEST(Lifting, ZeroDataAndScaling) {
  const Mesh mesh = generate_structured(4);
  const ReferenceElement ref(1);
  LiftingSample sample = random_lifting_sample(mesh, ref, mesh.h(), 1);
  const Real ratio = lifting_probe(mesh, ref, sample, mesh.h()).ratio;
  for (auto& v : sample.v) {
    v *= 7.0;
  }
  for (auto& faces : sample.mu) {
    for (auto& m : faces) {
      m *= 7.0;
    }
  }
  EXPECT_NEAR(lifting_probe(mesh, ref, sample, mesh.h()).ratio, ratio, 1e-12 * ratio);
  for (auto& v : sample.v) {
    v.setZero();
  }
  for (auto& faces : sample.mu) {
    for (auto& m : faces) {
      m.setZero();
    }
  }
  const LiftingProbeResult zero = lifting_probe(mesh, ref, sample, mesh.h());
  EXPECT_EQ(zero.tau_norm, 0.0);
  EXPECT_EQ(zero.ratio, 0.0);
}

TEST(Lifting, EstimateIsMeshIndependent) {
  const ReferenceElement ref(1);
  const Real c8 = estimate_lifting_constant(generate_structured(8), ref, 10, 42).c_I;
  const Real c16 = estimate_lifting_constant(generate_structured(16), ref, 10, 42).c_I;
  EXPECT_GT(c8, 0.0);
  EXPECT_LT(std::abs(c8 - c16), 0.1 * c16);
}

TEST(Lifting, SolutionSampleUsesTraceMismatch) {
  const Mesh mesh = generate_structured(4);
  const ReferenceElement ref(1);
  // For u = x reproduced exactly, lambda equals the trace on interior edges,
  // so only boundary faces carry a mismatch.
  const ManufacturedCase c = polynomial_case(1, 2.0);
  const FieldSolution f = solve(mesh, ref, 2.0, c.data());
  const LiftingSample s = lifting_sample_from_solution(mesh, ref, f, mesh.h());
  for (Index cell = 0; cell < mesh.num_cells(); ++cell) {
    EXPECT_LT((s.v[cell] - f.u[cell] / 2.0).norm(), 1e-14);
    for (int l = 0; l < 3; ++l) {
      const bool boundary = mesh.edges()[mesh.cell_edges(cell)[l].edge].boundary;
      if (!boundary) {
        EXPECT_LT(s.mu[cell][l].norm(), 1e-10);
      }
    }
  }
}

TEST(Stability, ConstantsAndDualNormBound) {
  std::mt19937_64 rng(41);
  const Mesh mesh = generate_structured(2);
  const ReferenceElement ref(0);
  const Real kappa = 3.0;
  const StabilityProbeResult r = stability_probe(mesh, ref, kappa);
  EXPECT_GT(r.c_A_estimate, 0.0);
  EXPECT_LE(r.c_A_estimate, r.C_A_estimate);
  EXPECT_LE(r.C_A_sampled, r.C_A_estimate * (1.0 + 1e-10));
  // For every x the dual norm of A(x; .) is at least c_A |||x|||.
  const Discretization disc = discretize(mesh, ref, kappa, {});
  const CMatrix k(assemble_monolithic(mesh, ref, disc.blocks));
  const RMatrix g(energy_gram(mesh, ref, kappa, mesh.h()));
  const Eigen::LLT<RMatrix> llt(g);
  for (int trial = 0; trial < 20; ++trial) {
    const CVector x = random_cvector(k.rows(), rng);
    const Real nx = std::sqrt(x.dot(g.cast<Complex>() * x).real());
    const CVector kx = k * x;
    const Real dual = std::sqrt(kx.dot(llt.solve(kx.real()).cast<Complex>() + kI * llt.solve(kx.imag()).cast<Complex>()).real());
    EXPECT_GE(dual, r.c_A_estimate * nx * (1.0 - 1e-10));
    EXPECT_LE(dual, r.C_A_estimate * nx * (1.0 + 1e-10));
  }
  EXPECT_NEAR(r.schur.symmetry_residual, 0.0, 1e-12);
  EXPECT_NEAR(r.schur.hermitian_residual, 2.0, 1e-12);
  EXPECT_NEAR(r.schur.hermitian_part_min, 0.0, 1e-12 * r.schur.sigma_max);
  EXPECT_NEAR(r.schur.hermitian_part_max, 0.0, 1e-12 * r.schur.sigma_max);
}

TEST(Stability, RespectsUnknownCap) {
  EXPECT_THROW(stability_probe(generate_structured(4), ReferenceElement(1), 2.0, 2, 42, 50), ConfigError);
}

TEST(ProjectedError, ExactCaseHasNoRatio) {
  const Mesh mesh = generate_structured(4);
  const ReferenceElement ref(1);
  const ManufacturedCase c = polynomial_case(1, 2.0);
  const FieldSolution f = solve(mesh, ref, 2.0, c.data());
  const ProjectedErrorBound b = check_projected_error_bound(c, mesh, ref, f);
  EXPECT_FALSE(b.ratio.has_value());
  EXPECT_LT(b.energy_error, 1e-10);
}

TEST(ProjectedError, PlaneWaveRatioIsFinite) {
  const Mesh mesh = generate_structured(8);
  const ReferenceElement ref(1);
  const ManufacturedCase c = plane_wave(4.0);
  const FieldSolution f = solve(mesh, ref, 4.0, c.data());
  const ProjectedErrorBound b = check_projected_error_bound(c, mesh, ref, f);
  ASSERT_TRUE(b.ratio.has_value());
  EXPECT_GT(*b.ratio, 0.0);
  EXPECT_LT(*b.ratio, 10.0);
}

TEST(ProjectionStudy, OptimalRates) {
  const std::vector<int> levels{8, 16, 32};
  for (int k = 0; k <= 1; ++k) {
    const ProjectionReport r = projection_study(plane_wave(5.0), k, levels);
    ASSERT_EQ(r.rates.size(), 2u);
    const auto& finest = r.rates.back();
    EXPECT_NEAR(*finest[0], k + 1, 0.15);
    EXPECT_NEAR(*finest[1], k, 0.15);
    EXPECT_NEAR(*finest[3], k + 1, 0.15);
    EXPECT_NEAR(*finest[4], k + 1, 0.2);
    EXPECT_EQ(r.constant_estimates.size(), levels.size());
  }
}

TEST(ProjectionStudy, PolynomialsAreExact) {
  const std::vector<int> levels{2, 4};
  const ProjectionReport r = projection_study(polynomial_case(2, 1.0), 2, levels);
  for (const auto& l : r.levels) {
    EXPECT_LT(l.u_error, 1e-12);
    EXPECT_LT(l.sigma_error, 1e-12);
    EXPECT_LT(l.div_sigma_error, 1e-11);
  }
  for (const auto& rate : r.rates) {
    EXPECT_FALSE(rate[0].has_value());
  }
}

}  // namespace
}  // namespace hrtmdg
