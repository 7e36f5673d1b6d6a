#include "hrtmdg/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace hrtmdg {

namespace {

void check_degree(int degree) {
  if (degree < 0 || degree > kMaxQuadratureDegree) {
    throw ConfigError("quad_degree", "quadrature degree " + std::to_string(degree) + " outside [0, " +
                                         std::to_string(kMaxQuadratureDegree) + "]");
  }
}

}  // namespace

EdgeRule gauss_legendre(int npoints) {
  if (npoints < 1) {
    throw ConfigError("quad_degree", "Gauss rule needs at least one point");
  }
  EdgeRule rule;
  rule.degree = 2 * npoints - 1;
  rule.points.resize(npoints);
  rule.weights.resize(npoints);
  // Newton on P_n over [-1, 1], seeded with the Chebyshev-like guess.
  for (int i = 0; i < (npoints + 1) / 2; ++i) {
    Real x = std::cos(std::numbers::pi * (i + 0.75) / (npoints + 0.5));
    Real dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      Real p0 = 1.0, p1 = x;
      for (int j = 2; j <= npoints; ++j) {
        const Real p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = npoints * (x * p1 - p0) / (x * x - 1.0);
      const Real dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) {
        break;
      }
    }
    // Recompute the derivative at the converged root.
    Real p0 = 1.0, p1 = x;
    for (int j = 2; j <= npoints; ++j) {
      const Real p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = npoints * (x * p1 - p0) / (x * x - 1.0);
    const Real w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Map [-1, 1] -> [0, 1], ascending order.
    rule.points[i] = 0.5 * (1.0 - x);
    rule.points[npoints - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[npoints - 1 - i] = 0.5 * w;
  }
  if (npoints % 2 == 1) {
    rule.points[npoints / 2] = 0.5;
  }
  return rule;
}

EdgeRule quadrature_edge(int degree) {
  check_degree(degree);
  auto rule = gauss_legendre(degree / 2 + 1);
  rule.degree = degree;
  return rule;
}

TriangleRule quadrature_triangle(int degree) {
  check_degree(degree);
  // x = s (1 - t), y = t with Jacobian (1 - t): the integrand has degree
  // <= degree in s and <= degree + 1 in t.
  const auto rs = gauss_legendre(degree / 2 + 1);
  const auto rt = gauss_legendre((degree + 1) / 2 + 1);
  TriangleRule rule;
  rule.degree = degree;
  for (std::size_t j = 0; j < rt.points.size(); ++j) {
    const Real t = rt.points[j];
    for (std::size_t i = 0; i < rs.points.size(); ++i) {
      const Real s = rs.points[i];
      rule.points.emplace_back(s * (1.0 - t), t);
      rule.weights.push_back(rs.weights[i] * rt.weights[j] * (1.0 - t));
    }
  }
  return rule;
}

}  // namespace hrtmdg
