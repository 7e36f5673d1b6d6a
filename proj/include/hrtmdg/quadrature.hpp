#pragma once

#include <vector>

#include "hrtmdg/types.hpp"

namespace hrtmdg {

struct EdgeRule {
  std::vector<Real> points;  // on [0, 1]
  std::vector<Real> weights;  // sum to 1
  int degree = 0;
};

struct TriangleRule {
  std::vector<Point> points;  // on the reference triangle (0,0), (1,0), (0,1)
  std::vector<Real> weights;  // sum to 1/2
  int degree = 0;
};

inline constexpr int kMaxQuadratureDegree = 80;

/// n-point Gauss-Legendre rule mapped to [0, 1]; exact to degree 2n - 1.
EdgeRule gauss_legendre(int npoints);

/// Gauss rule on [0, 1] exact for polynomials of the given degree.
EdgeRule quadrature_edge(int degree);

/// Collapsed (Duffy) Gauss product rule on the reference triangle, exact for
/// polynomials of the given total degree. All weights are positive.
TriangleRule quadrature_triangle(int degree);

}  // namespace hrtmdg
