#pragma once

#include <string>

#include "hrtmdg/local.hpp"

namespace hrtmdg {

/// Exact solution of  Laplace(u) + kappa^2 u = f~  with u = g on the boundary,
/// together with the first-order fields sigma = i grad(u) / kappa and
/// div(sigma) = i Laplace(u) / kappa. All derivatives are analytic.
struct ManufacturedCase {
  std::string name;
  Real kappa = 1.0;
  ScalarField u;
  VectorField grad_u;
  ScalarField laplacian_u;
  ScalarField source;    // f~
  ScalarField boundary;  // g
  VectorField sigma;
  ScalarField div_sigma;
  /// Sobolev regularity available for rate predictions (large for smooth cases).
  Real regularity = 1e9;

  ProblemData data() const { return ProblemData{source, boundary}; }
};

}  // namespace hrtmdg
