#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hrtmdg/case.hpp"
#include "hrtmdg/global.hpp"

namespace hrtmdg {

/// Quadrature degree used when probes integrate non-polynomial fields.
int probe_quad_degree(const ReferenceElement& ref);

// ---------------------------------------------------------------------------
// Projections. Coefficients refer to the physical bases of ElementValues.

/// L2 projection onto P_k(K).
CVector project_pk(const ScalarField& u, const Mesh& mesh, Index cell, const ReferenceElement& ref,
                   int quad_degree = -1);
/// L2 projection onto P_k(e) in the edge's global orientation.
CVector project_edge(const ScalarField& lambda, const Mesh& mesh, Index edge, const ReferenceElement& ref,
                     int quad_degree = -1);
/// Raviart-Thomas interpolant: matches the edge normal moments against
/// P_k(e) and the interior moments against [P_{k-1}(K)]^2.
CVector project_rt(const VectorField& sigma, const Mesh& mesh, Index cell, const ReferenceElement& ref,
                   int quad_degree = -1);

/// (Pi^RT sigma, Pi^K u, Pi^e u) for an exact solution; the multiplier is
/// zero on boundary edges.
FieldSolution project_solution(const Mesh& mesh, const ReferenceElement& ref, const ManufacturedCase& exact,
                               int quad_degree = -1);

// ---------------------------------------------------------------------------
// Point evaluation of discrete fields.

Complex evaluate_u(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& fields, Index cell,
                   const Point& x);
CVec2 evaluate_sigma(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& fields, Index cell,
                     const Point& x);
Complex evaluate_lambda(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& fields, Index edge,
                        const Point& x);

// ---------------------------------------------------------------------------
// Norms.

/// (sum_K ||u_h - u||_K^2)^{1/2} for per-cell P_k coefficients. An empty
/// `exact` measures u_h itself.
Real broken_l2_norm_u(const Mesh& mesh, const ReferenceElement& ref, std::span<const CVector> u,
                      const ScalarField& exact = {}, int quad_degree = -1);
/// Same for per-cell RT_k coefficients against a vector field.
Real broken_l2_norm_sigma(const Mesh& mesh, const ReferenceElement& ref, std::span<const CVector> sigma,
                          const VectorField& exact = {}, int quad_degree = -1);

/// Gram matrix of the energy norm in GlobalLayout order:
///   kappa ||tau||^2 + kappa ||v||^2 + kappa^{-1} ||grad v||^2
///   + (kappa h)^{-1} sum_K ||mu - v|_K||^2_{dK},  mu = 0 on boundary edges.
Eigen::SparseMatrix<Real> energy_gram(const Mesh& mesh, const ReferenceElement& ref, Real kappa, Real h);

Real energy_norm(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& x, Real kappa, Real h);

/// The sesquilinear form A(x; y), evaluated term by term with quadrature.
/// Multiplier values on boundary edges are taken as zero.
Complex evaluate_form_A(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& x,
                        const FieldSolution& y, Real kappa);

// ---------------------------------------------------------------------------
// Probes.

struct ConsistencyReport {
  /// A(x_exact; y) - F(y) over all basis test functions y.
  Real exact_residual = 0.0;
  Real exact_scale = 0.0;
  /// A(e; 0, v, 0) and A(e; 0, 0, mu) for the projected error triple e.
  Real v_residual = 0.0;
  Real mu_residual = 0.0;
  /// Largest single term in either expansion.
  Real scale = 0.0;
  /// A(e; tau, 0, 0) - (i kappa (Pi^RT sigma - sigma), tau).
  Real tau_residual = 0.0;
  Real tau_scale = 0.0;

  bool passed(Real tol = 1e-10) const;
};

ConsistencyReport check_consistency(const ManufacturedCase& exact, const Mesh& mesh, const ReferenceElement& ref);

struct ConservationReport {
  /// r_K = -(i kappa u_h, 1)_K - <sigma_h . n, 1>_dK + (f, 1)_K.
  std::vector<Complex> residuals;
  Real max_local = 0.0;
  Real local_scale = 0.0;
  Real sum_abs = 0.0;
  /// (f, 1)_Omega - (i kappa u_h, 1)_Omega - <sigma_h . n, 1>_dOmega.
  Real global_residual = 0.0;
  Real global_scale = 0.0;
  /// Largest interior flux jump moment.
  Real jump = 0.0;
  Real jump_scale = 0.0;

  bool passed(Real tol = 1e-10) const;
};

ConservationReport check_conservation(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& fields,
                                      const ScalarField& source);

/// Per-cell data for the local lifting problem: v in P_k(K) and mu given on
/// each face in the face multiplier basis (may differ between the two sides).
struct LiftingSample {
  std::vector<CVector> v;
  std::vector<std::array<CVector, 3>> mu;
};

struct LiftingProbeResult {
  std::vector<CVector> tau_tilde;
  Real moment_residual = 0.0;  // relative to the moment scale
  Real tau_norm = 0.0;
  Real grad_v_norm = 0.0;
  Real mu_norm = 0.0;  // (sum_K ||mu||^2_dK)^{1/2}
  Real ratio = 0.0;    // tau_norm / (grad_v_norm^2 + h mu_norm^2)^{1/2}
};

LiftingProbeResult lifting_probe(const Mesh& mesh, const ReferenceElement& ref, const LiftingSample& sample, Real h);

/// Single-valued mu from multiplier coefficients (boundary edges forced to zero).
LiftingSample lifting_sample(const Mesh& mesh, const ReferenceElement& ref, std::span<const CVector> v,
                             std::span<const CVector> mu);
/// The choice from the stability argument: v = u_h / kappa and, per cell,
/// mu = (lambda_h - u_h) / (kappa h).
LiftingSample lifting_sample_from_solution(const Mesh& mesh, const ReferenceElement& ref,
                                           const FieldSolution& fields, Real h);
/// Random v and single-valued mu, scaled so both parts of the denominator are
/// of comparable size.
LiftingSample random_lifting_sample(const Mesh& mesh, const ReferenceElement& ref, Real h, std::uint64_t seed);

struct LiftingEstimate {
  Real c_I = 0.0;  // max ratio over all samples
  Real max_moment_residual = 0.0;
  int samples = 0;
  std::vector<Real> extra_ratios;  // ratio of each extra sample, in order
};

/// Max ratio over `samples` random samples plus the given extra samples.
LiftingEstimate estimate_lifting_constant(const Mesh& mesh, const ReferenceElement& ref, int samples,
                                          std::uint64_t seed, std::span<const LiftingSample> extra = {});

inline constexpr Index kStabilityUnknownCap = 3000;

struct SpectrumSummary {
  Index size = 0;
  Real sigma_min = 0.0;
  Real sigma_max = 0.0;
  Real symmetry_residual = 0.0;  // ||S - S^T|| / ||S||
  Real hermitian_residual = 0.0;  // ||S - S^H|| / ||S||
  /// Eigenvalue ranges of (S + S^H)/2 and (S - S^H)/(2i).
  Real hermitian_part_min = 0.0;
  Real hermitian_part_max = 0.0;
  Real skew_part_min = 0.0;
  Real skew_part_max = 0.0;
};

SpectrumSummary summarize_spectrum(const SparseMatrix& s);

struct StabilityProbeResult {
  Real c_A_estimate = 0.0;
  Real C_A_estimate = 0.0;  // largest singular value of the scaled operator
  Real C_A_sampled = 0.0;   // max over random pairs, never above C_A_estimate
  Index unknowns = 0;
  SpectrumSummary schur;
};

StabilityProbeResult stability_probe(const Mesh& mesh, const ReferenceElement& ref, Real kappa, int samples = 20,
                                     std::uint64_t seed = 42, Index unknown_cap = kStabilityUnknownCap);

struct ProjectedErrorBound {
  Real energy_error = 0.0;      // |||(Pi^RT sigma - sigma_h, Pi^K u - u_h, Pi^e u - lambda_h)|||
  Real projection_error = 0.0;  // sqrt(kappa) ||Pi^RT sigma - sigma||
  std::optional<Real> ratio;    // empty for the exact case (both sides vanish)
};

ProjectedErrorBound check_projected_error_bound(const ManufacturedCase& exact, const Mesh& mesh,
                                                const ReferenceElement& ref, const FieldSolution& fields);

struct ProjectionLevel {
  int n = 0;
  Real h = 0.0;
  Real u_error = 0.0;          // ||u - Pi^K u||
  Real grad_u_error = 0.0;     // ||grad(u - Pi^K u)||
  Real trace_error = 0.0;      // (sum_e ||u - Pi^e u||_e^2)^{1/2}
  Real sigma_error = 0.0;      // ||sigma - Pi^RT sigma||
  Real div_sigma_error = 0.0;  // ||div(sigma - Pi^RT sigma)||
};

struct ProjectionReport {
  int k = 0;
  Real kappa = 0.0;
  std::vector<ProjectionLevel> levels;
  /// Observed orders between consecutive levels, same field order as
  /// ProjectionLevel (u, grad u, trace, sigma, div sigma).
  std::vector<std::array<std::optional<Real>, 5>> rates;
  /// error / (h kappa)^{k+1} per level for u and sigma.
  std::vector<std::array<Real, 2>> constant_estimates;
};

ProjectionLevel projection_errors(const ManufacturedCase& exact, const Mesh& mesh, const ReferenceElement& ref);
ProjectionReport projection_study(const ManufacturedCase& exact, int k, std::span<const int> levels);

}  // namespace hrtmdg
