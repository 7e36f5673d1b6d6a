#include "hrtmdg/element.hpp"

#include <cmath>

namespace hrtmdg {

ReferenceTables::ReferenceTables(const ReferenceElement& ref, int quad_degree)
    : ref_(&ref), degree_(quad_degree) {
  cell_.rule = quadrature_triangle(quad_degree);
  const auto& pts = cell_.rule.points;
  const auto pk = ref.evaluate(BasisKind::PkCell, pts);
  const auto grad = ref.evaluate(BasisKind::PkGrad, pts);
  const auto rt = ref.evaluate(BasisKind::RtCell, pts);
  const auto div = ref.evaluate(BasisKind::RtDiv, pts);
  cell_.pk = pk.component[0];
  cell_.pk_dx = grad.component[0];
  cell_.pk_dy = grad.component[1];
  cell_.rt_x = rt.component[0];
  cell_.rt_y = rt.component[1];
  cell_.rt_div = div.component[0];

  edge_rule_ = quadrature_edge(quad_degree);
  const auto nq = static_cast<Index>(edge_rule_.points.size());
  for (int l = 0; l < 3; ++l) {
    std::vector<Point> epts;
    for (Real t : edge_rule_.points) {
      epts.push_back(reference::edge_point(l, t));
    }
    faces_[l].pk = ref.evaluate(BasisKind::PkCell, epts).component[0];
    const auto rte = ref.evaluate(BasisKind::RtCell, epts);
    faces_[l].rt_x = rte.component[0];
    faces_[l].rt_y = rte.component[1];
  }
  edge_forward_.resize(ref.dim_pk_edge(), nq);
  edge_reversed_.resize(ref.dim_pk_edge(), nq);
  for (Index q = 0; q < nq; ++q) {
    edge_forward_.col(q) = ref.pk_edge(edge_rule_.points[q]);
    edge_reversed_.col(q) = ref.pk_edge(1.0 - edge_rule_.points[q]);
  }
}

ElementValues::ElementValues(const Mesh& mesh, Index cell_index, const ReferenceTables& tables)
    : cell(cell_index), geometry(cell_geometry(mesh, cell_index)) {
  const auto& rc = tables.cell();
  const Real det = geometry.det;
  const Real pk_scale = 1.0 / std::sqrt(det);
  const Eigen::Matrix2d& b = geometry.jacobian;
  const Eigen::Matrix2d& bit = geometry.inverse_transpose;

  const auto nq = static_cast<Index>(rc.rule.points.size());
  interior.points.resize(nq);
  interior.weights.resize(nq);
  for (Index q = 0; q < nq; ++q) {
    interior.points[q] = geometry.map(rc.rule.points[q]);
    interior.weights(q) = rc.rule.weights[q] * det;
  }
  interior.pk = rc.pk * pk_scale;
  interior.pk_dx = (bit(0, 0) * rc.pk_dx + bit(0, 1) * rc.pk_dy) * pk_scale;
  interior.pk_dy = (bit(1, 0) * rc.pk_dx + bit(1, 1) * rc.pk_dy) * pk_scale;
  interior.rt_x = (b(0, 0) * rc.rt_x + b(0, 1) * rc.rt_y) / det;
  interior.rt_y = (b(1, 0) * rc.rt_x + b(1, 1) * rc.rt_y) / det;
  interior.rt_div = rc.rt_div / det;

  const auto& rule = tables.edge_rule();
  const auto ne = static_cast<Index>(rule.points.size());
  for (int l = 0; l < 3; ++l) {
    FacePart& f = faces[l];
    const CellEdge& ce = mesh.cell_edges(cell_index)[l];
    const Edge& edge = mesh.edges()[ce.edge];
    f.edge = ce.edge;
    f.sign = ce.sign;
    f.boundary = edge.boundary;
    f.normal = ce.sign * edge.normal;
    const Point a = mesh.vertex(cell_index, l);
    const Point c = mesh.vertex(cell_index, (l + 1) % 3);
    f.points.resize(ne);
    f.weights.resize(ne);
    for (Index q = 0; q < ne; ++q) {
      f.points[q] = a + rule.points[q] * (c - a);
      f.weights(q) = rule.weights[q] * edge.length;
    }
    const auto& rf = tables.face(l);
    f.pk = rf.pk * pk_scale;
    const RMatrix phys_x = (b(0, 0) * rf.rt_x + b(0, 1) * rf.rt_y) / det;
    const RMatrix phys_y = (b(1, 0) * rf.rt_x + b(1, 1) * rf.rt_y) / det;
    f.rt_normal = f.normal.x() * phys_x + f.normal.y() * phys_y;
    const bool reversed = mesh.cells()[cell_index][l] != edge.vertices[0];
    f.multiplier = tables.edge_basis(reversed) / std::sqrt(edge.length);
  }
}

}  // namespace hrtmdg
