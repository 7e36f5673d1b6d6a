#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrtmdg/case.hpp"
#include "hrtmdg/global.hpp"
#include "hrtmdg/rates.hpp"

namespace hrtmdg {

inline constexpr Real kDefaultPlaneWaveAngle = std::numbers::pi / 7.0;
/// Smallest admissible distance between kappa^2 and a Dirichlet eigenvalue
/// pi^2 (m^2 + n^2) of the unit square.
inline constexpr Real kResonanceGap = 0.5;

/// u = exp(i kappa (x cos(theta) + y sin(theta))).
ManufacturedCase plane_wave(Real kappa, Real theta = kDefaultPlaneWaveAngle);
/// u = sin(pi x) sin(pi y), homogeneous boundary data.
ManufacturedCase sine_product(Real kappa);
/// p = 0: u = 1; p = 1: u = x; p >= 2: u = x^p + x^{p-1} y + y^p.
ManufacturedCase polynomial_case(int p, Real kappa);

struct CaseSpec {
  std::string name = "sine_product";  // plane_wave | sine_product | polynomial
  Real theta = kDefaultPlaneWaveAngle;
  int polynomial_degree = 2;
};

ManufacturedCase make_case(const CaseSpec& spec, Real kappa);

/// Dirichlet eigenvalue of the unit square closest to kappa^2.
struct NearestEigenvalue {
  int m = 1;
  int n = 1;
  Real value = 0.0;
  Real gap = 0.0;  // |kappa^2 - value|
};

NearestEigenvalue nearest_dirichlet_eigenvalue(Real kappa);
/// Raises ConfigError("kappa", ...) when kappa^2 is closer than min_gap to the spectrum.
void check_resonance_guard(Real kappa, Real min_gap = kResonanceGap);

struct CaseCheck {
  Real pde_residual = 0.0;    // finite-difference Laplacian, relative to kappa^2 |u| + |f~|
  Real sigma_residual = 0.0;  // |sigma - i grad(u) / kappa|, relative
  Real boundary_residual = 0.0;
  bool passed() const { return pde_residual <= 1e-5 && sigma_residual <= 1e-12 && boundary_residual <= 1e-12; }
};

/// Samples the case at random interior and boundary points.
CaseCheck self_check(const ManufacturedCase& c, std::uint64_t seed = 42, int samples = 32);
/// Raises ConfigError("case", ...) when self_check fails.
void require_valid_case(const ManufacturedCase& c);

struct ConvergenceRow {
  std::string case_name;
  int k = 0;
  Real kappa = 0.0;
  int n = 0;
  Real h = 0.0;
  Real err_u = 0.0;
  Real err_sigma = 0.0;
  Real err_energy = 0.0;
  std::optional<Real> rate_u;
  std::optional<Real> rate_sigma;
  Real const_norm = 0.0;  // err_sigma / (h kappa)^{k+1}
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
};

using CaseFactory = std::function<ManufacturedCase(Real kappa)>;

/// Solves on generate_structured(n) for every kappa (outer) and level (inner)
/// and appends the rows to `table` as they complete, so a failing solve leaves
/// the finished rows in place. Rates compare consecutive levels of one kappa.
void run_convergence(const CaseFactory& factory, int k, std::span<const int> levels, std::span<const Real> kappas,
                     ConvergenceTable& table, const SolveOptions& options = {});
ConvergenceTable run_convergence(const CaseFactory& factory, int k, std::span<const int> levels,
                                 std::span<const Real> kappas, const SolveOptions& options = {});

inline constexpr const char* kConvergenceCsvHeader =
    "case,k,kappa,n,h,err_u,err_sigma,err_energy,rate_u,rate_sigma,const_norm";

/// One line per row after the header; reals with 16 significant digits,
/// missing rates left empty.
void write_csv(std::ostream& out, const ConvergenceTable& table);
std::string format_real(Real value);

}  // namespace hrtmdg
