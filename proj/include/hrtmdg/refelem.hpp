#pragma once

#include <array>
#include <span>
#include <vector>

#include "hrtmdg/quadrature.hpp"
#include "hrtmdg/types.hpp"

namespace hrtmdg {

class Mesh;

using VectorTable = Eigen::Matrix<Real, Eigen::Dynamic, 2>;

enum class BasisKind { PkCell, PkEdge, RtCell, RtDiv, PkGrad };

/// Values of one basis family at a set of points. `component[c](i, q)` is
/// component c of basis function i at point q; scalar families have one
/// component, RtCell and PkGrad have two.
struct BasisTable {
  std::vector<RMatrix> component;
};

/// Reference triangle T = {x, y >= 0, x + y <= 1} with vertices (0,0), (1,0),
/// (0,1). Local edge l runs from vertex l to vertex (l + 1) % 3.
namespace reference {
Point vertex(int i);
Point edge_point(int local_edge, Real t);
Point edge_normal(int local_edge);
Real edge_length(int local_edge);
/// Integral of x^a y^b over the reference triangle: a! b! / (a + b + 2)!.
Real monomial_integral(int a, int b);
}  // namespace reference

/// P_k and RT_k bases on the reference triangle plus the P_k basis on [0, 1].
///
/// The P_k bases are L2-orthonormal (Gram-Schmidt on graded-lex monomials,
/// carried out exactly through a Cholesky factor of the monomial Gram
/// matrix). The RT_k basis is dual to the degrees of freedom
///   edge l, mode m:  int_{e_l} (tau . n_l) q_m ds,  q_m orthonormal on [0,1]
///                    in the edge parameter t (local orientation);
///   interior:        int_T tau . (p, 0) and int_T tau . (0, p), p in P_{k-1}
/// in this order (edge 0 modes, edge 1, edge 2, x-moments, y-moments).
class ReferenceElement {
 public:
  static constexpr int kDefaultMaxDegree = 3;

  /// quad_degree < 0 selects 2k + 2; rhs_quad_degree < 0 selects 2k + 6.
  explicit ReferenceElement(int degree, int quad_degree = -1, int rhs_quad_degree = -1,
                            int max_degree = kDefaultMaxDegree);

  int degree() const { return k_; }
  int quad_degree() const { return quad_degree_; }
  int rhs_quad_degree() const { return rhs_quad_degree_; }

  int dim_pk() const { return (k_ + 1) * (k_ + 2) / 2; }
  int dim_pk_lower() const { return k_ * (k_ + 1) / 2; }
  int dim_pk_edge() const { return k_ + 1; }
  int dim_rt() const { return (k_ + 1) * (k_ + 3); }

  const TriangleRule& quad_cell() const { return quad_cell_; }
  const EdgeRule& quad_edge() const { return quad_edge_; }

  RVector pk(const Point& p) const;
  VectorTable pk_grad(const Point& p) const;
  RVector pk_edge(Real t) const;
  VectorTable rt(const Point& p) const;
  RVector rt_div(const Point& p) const;

  BasisTable evaluate(BasisKind kind, std::span<const Point> points) const;

  /// Degrees of freedom applied to the RT basis; the identity by construction.
  RMatrix rt_dof_matrix() const;

  /// Monomial coefficients (graded-lex, degree <= k) of the P_k basis.
  const RMatrix& pk_coefficients() const { return pk_coeff_; }

 private:
  RVector monomials(const Point& p, int max_degree) const;
  RMatrix apply_dofs(const RMatrix& coeff) const;

  int k_;
  int quad_degree_;
  int rhs_quad_degree_;
  TriangleRule quad_cell_;
  EdgeRule quad_edge_;
  RMatrix pk_coeff_;  // monomials(deg <= k) x dim_pk
  RMatrix rt_coeff_;  // [x-part; y-part] over monomials(deg <= k+1) x dim_rt
};

/// Affine map F(xr) = B xr + b of a counterclockwise triangle.
struct CellGeometry {
  Point origin = Point::Zero();
  Eigen::Matrix2d jacobian = Eigen::Matrix2d::Identity();
  Real det = 1.0;
  Eigen::Matrix2d inverse_transpose = Eigen::Matrix2d::Identity();

  Point map(const Point& ref) const { return origin + jacobian * ref; }
  Point pull_back(const Point& x) const { return inverse_transpose.transpose() * (x - origin); }
};

/// Raises GeometryError for degenerate or clockwise triangles.
CellGeometry affine_geometry(const Point& v0, const Point& v1, const Point& v2);
CellGeometry cell_geometry(const Mesh& mesh, Index cell);

/// Contravariant Piola transform tau = B tau_ref / det B, row-wise.
VectorTable piola_map(const CellGeometry& geometry, const VectorTable& reference_values);

}  // namespace hrtmdg
