#pragma once

#include <array>
#include <vector>

#include "hrtmdg/mesh.hpp"
#include "hrtmdg/refelem.hpp"

namespace hrtmdg {

/// Reference basis values at the quadrature points of one rule, shared by
/// every cell. Edge tables hold, per local edge, the cell bases at the mapped
/// edge points and the edge basis at t and at 1 - t (both orientations).
class ReferenceTables {
 public:
  ReferenceTables(const ReferenceElement& ref, int quad_degree);

  const ReferenceElement& element() const { return *ref_; }
  int quad_degree() const { return degree_; }

  struct Cell {
    TriangleRule rule;
    RMatrix pk, pk_dx, pk_dy, rt_x, rt_y, rt_div;  // basis x point
  };
  struct Face {
    RMatrix pk, rt_x, rt_y;  // basis x point
  };

  const Cell& cell() const { return cell_; }
  const Face& face(int local_edge) const { return faces_[local_edge]; }
  const EdgeRule& edge_rule() const { return edge_rule_; }
  const RMatrix& edge_basis(bool reversed) const { return reversed ? edge_reversed_ : edge_forward_; }

 private:
  const ReferenceElement* ref_;
  int degree_;
  Cell cell_;
  EdgeRule edge_rule_;
  std::array<Face, 3> faces_;
  RMatrix edge_forward_, edge_reversed_;
};

/// Physical basis values on one cell. The P_k basis is scaled by
/// |det B|^{-1/2} so it is L2-orthonormal on the cell; the RT_k basis is the
/// Piola image of the reference basis; the multiplier basis on an edge of
/// length |e| is the orthonormal Legendre basis in the edge's global
/// parameter divided by |e|^{1/2}.
struct ElementValues {
  ElementValues(const Mesh& mesh, Index cell, const ReferenceTables& tables);

  struct CellPart {
    std::vector<Point> points;
    RVector weights;  // physical: include det B
    RMatrix pk, pk_dx, pk_dy, rt_x, rt_y, rt_div;
  };
  struct FacePart {
    Index edge = -1;
    int sign = 1;
    bool boundary = true;
    Point normal = Point::Zero();  // outward for this cell
    std::vector<Point> points;
    RVector weights;  // physical: include |e|
    RMatrix pk;         // cell P_k traces
    RMatrix rt_normal;  // phi . n (outward)
    RMatrix multiplier;  // edge basis, global orientation
  };

  Index cell;
  CellGeometry geometry;
  CellPart interior;
  std::array<FacePart, 3> faces;
};

}  // namespace hrtmdg
