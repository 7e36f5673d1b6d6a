#include "hrtmdg/refelem.hpp"

#include <cmath>
#include <string>

#include "hrtmdg/mesh.hpp"

namespace hrtmdg {

namespace {

int num_monomials(int max_degree) { return (max_degree + 1) * (max_degree + 2) / 2; }

// Graded-lex position of x^(d-j) y^j.
int monomial_index(int d, int j) { return d * (d + 1) / 2 + j; }

Real factorial(int n) {
  Real f = 1.0;
  for (int i = 2; i <= n; ++i) {
    f *= i;
  }
  return f;
}

// Orthonormal Legendre polynomial of degree m on [0, 1].
Real legendre01(int m, Real t) { return std::sqrt(2.0 * m + 1.0) * std::legendre(m, 2.0 * t - 1.0); }

}  // namespace

namespace reference {

Point vertex(int i) {
  static const std::array<Point, 3> v{Point(0.0, 0.0), Point(1.0, 0.0), Point(0.0, 1.0)};
  return v[i];
}

Point edge_point(int local_edge, Real t) {
  return vertex(local_edge) + t * (vertex((local_edge + 1) % 3) - vertex(local_edge));
}

Point edge_normal(int local_edge) {
  const Point d = vertex((local_edge + 1) % 3) - vertex(local_edge);
  return Point(d.y(), -d.x()).normalized();
}

Real edge_length(int local_edge) { return (vertex((local_edge + 1) % 3) - vertex(local_edge)).norm(); }

Real monomial_integral(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }

}  // namespace reference

ReferenceElement::ReferenceElement(int degree, int quad_degree, int rhs_quad_degree, int max_degree)
    : k_(degree),
      quad_degree_(quad_degree < 0 ? 2 * degree + 2 : quad_degree),
      rhs_quad_degree_(rhs_quad_degree < 0 ? 2 * degree + 6 : rhs_quad_degree) {
  if (degree < 0 || degree > max_degree) {
    throw ConfigError("k", "polynomial degree " + std::to_string(degree) + " outside supported range [0, " +
                               std::to_string(max_degree) + "]");
  }
  if (quad_degree_ < 2 * k_ + 2) {
    throw ConfigError("quad_degree", "quadrature degree must be at least 2k+2 = " + std::to_string(2 * k_ + 2));
  }
  if (rhs_quad_degree_ < quad_degree_) {
    rhs_quad_degree_ = quad_degree_;
  }
  quad_cell_ = quadrature_triangle(quad_degree_);
  quad_edge_ = quadrature_edge(quad_degree_);

  // Orthonormal P_k: C = L^{-T} with G = L L^T the exact monomial Gram matrix.
  const int nm = num_monomials(k_);
  RMatrix gram(nm, nm);
  for (int d1 = 0; d1 <= k_; ++d1) {
    for (int j1 = 0; j1 <= d1; ++j1) {
      for (int d2 = 0; d2 <= k_; ++d2) {
        for (int j2 = 0; j2 <= d2; ++j2) {
          gram(monomial_index(d1, j1), monomial_index(d2, j2)) =
              reference::monomial_integral(d1 - j1 + d2 - j2, j1 + j2);
        }
      }
    }
  }
  const Eigen::LLT<RMatrix> llt(gram);
  const RMatrix lower = llt.matrixL();
  pk_coeff_ = lower.transpose().triangularView<Eigen::Upper>().solve(RMatrix::Identity(nm, nm));

  // RT_k spanning set: [P_k]^2 followed by x * (homogeneous degree-k monomials).
  const int nm1 = num_monomials(k_ + 1);
  RMatrix span = RMatrix::Zero(2 * nm1, dim_rt());
  int col = 0;
  for (int m = 0; m < nm; ++m) {
    span(m, col++) = 1.0;
  }
  for (int m = 0; m < nm; ++m) {
    span(nm1 + m, col++) = 1.0;
  }
  for (int j = 0; j <= k_; ++j) {
    // x * x^(k-j) y^j = x^(k+1-j) y^j ; y * x^(k-j) y^j = x^(k-j) y^(j+1)
    span(monomial_index(k_ + 1, j), col) = 1.0;
    span(nm1 + monomial_index(k_ + 1, j + 1), col) = 1.0;
    ++col;
  }
  const RMatrix dofs = apply_dofs(span);
  rt_coeff_ = span * dofs.partialPivLu().inverse();
}

RVector ReferenceElement::monomials(const Point& p, int max_degree) const {
  RVector out(num_monomials(max_degree));
  for (int d = 0; d <= max_degree; ++d) {
    for (int j = 0; j <= d; ++j) {
      out(monomial_index(d, j)) = std::pow(p.x(), d - j) * std::pow(p.y(), j);
    }
  }
  return out;
}

RVector ReferenceElement::pk(const Point& p) const { return pk_coeff_.transpose() * monomials(p, k_); }

VectorTable ReferenceElement::pk_grad(const Point& p) const {
  const int nm = num_monomials(k_);
  RVector dx = RVector::Zero(nm), dy = RVector::Zero(nm);
  for (int d = 0; d <= k_; ++d) {
    for (int j = 0; j <= d; ++j) {
      const int a = d - j, b = j;
      if (a > 0) {
        dx(monomial_index(d, j)) = a * std::pow(p.x(), a - 1) * std::pow(p.y(), b);
      }
      if (b > 0) {
        dy(monomial_index(d, j)) = b * std::pow(p.x(), a) * std::pow(p.y(), b - 1);
      }
    }
  }
  VectorTable out(dim_pk(), 2);
  out.col(0) = pk_coeff_.transpose() * dx;
  out.col(1) = pk_coeff_.transpose() * dy;
  return out;
}

RVector ReferenceElement::pk_edge(Real t) const {
  RVector out(dim_pk_edge());
  for (int m = 0; m <= k_; ++m) {
    out(m) = legendre01(m, t);
  }
  return out;
}

VectorTable ReferenceElement::rt(const Point& p) const {
  const int nm1 = num_monomials(k_ + 1);
  const RVector mono = monomials(p, k_ + 1);
  VectorTable out(dim_rt(), 2);
  out.col(0) = rt_coeff_.topRows(nm1).transpose() * mono;
  out.col(1) = rt_coeff_.bottomRows(nm1).transpose() * mono;
  return out;
}

RVector ReferenceElement::rt_div(const Point& p) const {
  const int nm1 = num_monomials(k_ + 1);
  RVector dx = RVector::Zero(nm1), dy = RVector::Zero(nm1);
  for (int d = 0; d <= k_ + 1; ++d) {
    for (int j = 0; j <= d; ++j) {
      const int a = d - j, b = j;
      if (a > 0) {
        dx(monomial_index(d, j)) = a * std::pow(p.x(), a - 1) * std::pow(p.y(), b);
      }
      if (b > 0) {
        dy(monomial_index(d, j)) = b * std::pow(p.x(), a) * std::pow(p.y(), b - 1);
      }
    }
  }
  return rt_coeff_.topRows(nm1).transpose() * dx + rt_coeff_.bottomRows(nm1).transpose() * dy;
}

BasisTable ReferenceElement::evaluate(BasisKind kind, std::span<const Point> points) const {
  const auto np = static_cast<Index>(points.size());
  BasisTable table;
  switch (kind) {
    case BasisKind::PkCell:
      table.component.emplace_back(dim_pk(), np);
      for (Index q = 0; q < np; ++q) {
        table.component[0].col(q) = pk(points[q]);
      }
      break;
    case BasisKind::PkEdge:
      // Points are read as (t, unused).
      table.component.emplace_back(dim_pk_edge(), np);
      for (Index q = 0; q < np; ++q) {
        table.component[0].col(q) = pk_edge(points[q].x());
      }
      break;
    case BasisKind::RtDiv:
      table.component.emplace_back(dim_rt(), np);
      for (Index q = 0; q < np; ++q) {
        table.component[0].col(q) = rt_div(points[q]);
      }
      break;
    case BasisKind::RtCell:
    case BasisKind::PkGrad: {
      const int n = kind == BasisKind::RtCell ? dim_rt() : dim_pk();
      table.component.assign(2, RMatrix(n, np));
      for (Index q = 0; q < np; ++q) {
        const VectorTable v = kind == BasisKind::RtCell ? rt(points[q]) : pk_grad(points[q]);
        table.component[0].col(q) = v.col(0);
        table.component[1].col(q) = v.col(1);
      }
      break;
    }
  }
  return table;
}

// Rows: degrees of freedom; columns: the vector functions given by `coeff`
// over monomials of degree <= k + 1.
RMatrix ReferenceElement::apply_dofs(const RMatrix& coeff) const {
  const int nm1 = num_monomials(k_ + 1);
  const int ndof = dim_rt();
  RMatrix out = RMatrix::Zero(ndof, coeff.cols());
  const auto edge_rule = quadrature_edge(2 * k_ + 2);
  for (int l = 0; l < 3; ++l) {
    const Point n = reference::edge_normal(l);
    const Real len = reference::edge_length(l);
    for (std::size_t q = 0; q < edge_rule.points.size(); ++q) {
      const Real t = edge_rule.points[q];
      const RVector mono = monomials(reference::edge_point(l, t), k_ + 1);
      const RVector normal_trace =
          n.x() * (coeff.topRows(nm1).transpose() * mono) + n.y() * (coeff.bottomRows(nm1).transpose() * mono);
      const RVector modes = pk_edge(t);
      for (int m = 0; m <= k_; ++m) {
        out.row(l * (k_ + 1) + m) += (edge_rule.weights[q] * len * modes(m)) * normal_trace.transpose();
      }
    }
  }
  const int nl = dim_pk_lower();
  if (nl > 0) {
    const auto cell_rule = quadrature_triangle(2 * k_ + 2);
    const int offset = 3 * (k_ + 1);
    for (std::size_t q = 0; q < cell_rule.points.size(); ++q) {
      const Point& p = cell_rule.points[q];
      const RVector mono = monomials(p, k_ + 1);
      const RVector vx = coeff.topRows(nm1).transpose() * mono;
      const RVector vy = coeff.bottomRows(nm1).transpose() * mono;
      const RVector lower = pk(p).head(nl);
      for (int j = 0; j < nl; ++j) {
        out.row(offset + j) += (cell_rule.weights[q] * lower(j)) * vx.transpose();
        out.row(offset + nl + j) += (cell_rule.weights[q] * lower(j)) * vy.transpose();
      }
    }
  }
  return out;
}

RMatrix ReferenceElement::rt_dof_matrix() const { return apply_dofs(rt_coeff_); }

CellGeometry affine_geometry(const Point& v0, const Point& v1, const Point& v2) {
  CellGeometry g;
  g.origin = v0;
  g.jacobian.col(0) = v1 - v0;
  g.jacobian.col(1) = v2 - v0;
  g.det = g.jacobian.determinant();
  const Real scale = std::max(g.jacobian.col(0).squaredNorm(), g.jacobian.col(1).squaredNorm());
  if (!(g.det > 1e-14 * scale)) {
    throw GeometryError("degenerate or clockwise cell (det B = " + std::to_string(g.det) + ")");
  }
  g.inverse_transpose = g.jacobian.inverse().transpose();
  return g;
}

CellGeometry cell_geometry(const Mesh& mesh, Index cell) {
  return affine_geometry(mesh.vertex(cell, 0), mesh.vertex(cell, 1), mesh.vertex(cell, 2));
}

VectorTable piola_map(const CellGeometry& geometry, const VectorTable& reference_values) {
  return reference_values * geometry.jacobian.transpose() / geometry.det;
}

}  // namespace hrtmdg
